#include "dpm/agent.hpp"

#include <algorithm>

#include "dpm/patches.hpp"

namespace dpm::agent {
namespace {

Vec2 policy_displacement(const Policy& policy, const GrayImage& img, const patches::PatchFrame& frame,
                         double h) {
  return std::visit(
      [&](const auto& p) -> Vec2 {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LearnedPolicy>) {
          auto patch = patches::extract_patch(img, frame);
          patches::standardize(patch);
          return model::forward<float>(*p.model, patch);
        } else {
          return patches::to_patch_coords(h * field::sample_field(*p.field, frame.center), frame);
        }
      },
      policy);
}

}  // namespace

AgentState init_state(Vec2 seed, std::optional<Vec2> heading, std::mt19937_64& rng, int width,
                      int height, int patch_size) {
  const double margin = patch_size / 2.0;
  if (seed.x < margin || seed.y < margin || seed.x > width - 1 - margin || seed.y > height - 1 - margin) {
    throw Error(Errc::TooCloseToBorder, "seed must be at least P/2 px from every border");
  }
  Vec2 dir;
  if (heading) {
    const double n = norm(*heading);
    if (n == 0.0) throw Error(Errc::DegenerateDirection, "zero initial heading");
    dir = (1.0 / n) * *heading;
  } else {
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    dir = unit_from_angle(angle(rng));
  }
  return {seed, dir, 0, 0};
}

AgentState step(const Policy& policy, const GrayImage& img, const AgentState& state, const StepConfig& cfg) {
  const patches::PatchFrame frame{state.position, angle_of(state.heading), cfg.patch_size};
  const Vec2 d_patch = policy_displacement(policy, img, frame, cfg.h);
  Vec2 d_image = patches::to_image_coords(d_patch, frame);
  const double len = norm(d_image);
  if (!(len >= 1e-6)) throw Error(Errc::DegenerateStep, "policy displacement vanished");
  if (cfg.renormalize) {
    d_image *= cfg.h / len;
  } else {
    d_image *= std::clamp(len, cfg.h_min, cfg.h_max) / len;
  }

  const double margin = cfg.patch_size / 2.0;
  const Vec2 raw = state.position + d_image;
  const Vec2 clamped{std::clamp(raw.x, margin, img.width() - 1 - margin),
                     std::clamp(raw.y, margin, img.height() - 1 - margin)};
  AgentState next;
  next.position = clamped;
  next.heading = (1.0 / norm(d_image)) * d_image;
  next.t = state.t + 1;
  next.pinned_steps = clamped == raw ? 0 : state.pinned_steps + 1;
  if (next.pinned_steps >= 10) throw Error(Errc::Stalled, "agent pinned at the border margin");
  return next;
}

RolloutResult rollout(const Policy& policy, const GrayImage& img, const AgentState& init,
                      const StepConfig& step_cfg, const StopConfig& stop_cfg) {
  RolloutResult result;
  poincare::Tracker tracker({stop_cfg.warmup, stop_cfg.eps, stop_cfg.k});
  result.trajectory.push_back(init);
  tracker.push(init.position);
  while (result.trajectory.back().t < stop_cfg.max_steps) {
    result.trajectory.push_back(step(policy, img, result.trajectory.back(), step_cfg));
    if (tracker.push(result.trajectory.back().position)) {
      const auto& xs = tracker.crossings();
      result.contour = poincare::extract_cycle(tracker.positions(), xs[xs.size() - 2], xs.back(),
                                               stop_cfg.n_points, step_cfg.h);
      result.section = *tracker.section();
      result.crossings = xs;
      result.magnitudes = tracker.magnitudes();
      return result;
    }
  }
  throw NonConvergence(stop_cfg.max_steps, std::move(result.trajectory));
}

}  // namespace dpm::agent
