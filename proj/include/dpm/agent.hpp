#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "dpm/common.hpp"
#include "dpm/field.hpp"
#include "dpm/geometry.hpp"
#include "dpm/model.hpp"
#include "dpm/poincare.hpp"

// Agent rollout: oriented patch -> policy -> displacement, repeated until the
// Poincaré criterion fires.
namespace dpm::agent {

struct AgentState {
  Vec2 position;
  Vec2 heading;          // unit sampling direction
  std::int64_t t = 0;
  int pinned_steps = 0;  // consecutive steps clamped at the border margin
};

using Trajectory = std::vector<AgentState>;

struct LearnedPolicy {
  const model::PolicyModel* model = nullptr;
};

/// Reads the ground-truth field directly; isolates the dynamics from the regressor.
struct OraclePolicy {
  const field::FieldBundle* field = nullptr;
};

using Policy = std::variant<LearnedPolicy, OraclePolicy>;

struct StepConfig {
  double h = 2.0;
  double h_min = 0.5;
  double h_max = 4.0;
  bool renormalize = true;
  int patch_size = 64;
};

struct StopConfig {
  std::size_t warmup = 50;
  double eps = 2.0;
  std::size_t k = 2;
  std::int64_t max_steps = 4000;
  std::size_t n_points = 200;
};

/// Throws TooCloseToBorder when the seed is within P/2 of an image border.
/// Without an explicit heading a uniformly random direction is drawn from rng.
AgentState init_state(Vec2 seed, std::optional<Vec2> heading, std::mt19937_64& rng, int width,
                      int height, int patch_size = 64);

/// One policy query and position update. Throws DegenerateStep for a vanishing
/// displacement and Stalled after 10 consecutive steps pinned at the margin.
AgentState step(const Policy& policy, const GrayImage& img, const AgentState& state, const StepConfig& cfg);

class NonConvergence : public Error {
 public:
  NonConvergence(std::int64_t max_steps, Trajectory partial)
      : Error(Errc::NonConvergence, "no convergence within " + std::to_string(max_steps) + " steps"),
        partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

struct RolloutResult {
  Trajectory trajectory;
  geometry::Contour contour;
  poincare::PoincareSection section;
  std::vector<poincare::CrossingRecord> crossings;
  std::vector<double> magnitudes;
};

/// Throws NonConvergence (carrying the partial trajectory) after max_steps.
RolloutResult rollout(const Policy& policy, const GrayImage& img, const AgentState& init,
                      const StepConfig& step_cfg, const StopConfig& stop_cfg);

}  // namespace dpm::agent
