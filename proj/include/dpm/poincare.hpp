#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpm/common.hpp"
#include "dpm/geometry.hpp"

// Stopping criterion: first-return map on a ray-shaped Poincaré section.
namespace dpm::poincare {

struct PoincareSection {
  Vec2 anchor;
  Vec2 direction;  // unit
  bool frozen = false;
};

struct CrossingRecord {
  std::int64_t step = 0;  // index of the segment's first position
  double t_param = 0.0;   // distance from the anchor along the ray
  Vec2 point;
};

/// Anchor at the centroid of the last `warmup` positions, ray toward the latest
/// position. Throws InsufficientPrefix when fewer positions are available.
PoincareSection place_section(std::span<const Vec2> prefix, std::size_t warmup);

/// A record iff segment p0 -> p1 crosses the ray with cross(direction, p - anchor)
/// going from negative to non-negative, at a positive distance along the ray.
std::optional<CrossingRecord> detect_crossing(Vec2 p0, Vec2 p1, const PoincareSection& section,
                                              std::int64_t step = 0);

/// |t_{k+1} - t_k| for consecutive crossings.
std::vector<double> map_magnitudes(std::span<const CrossingRecord> crossings);

/// True iff the last k magnitudes are all <= eps.
bool converged(std::span<const double> magnitudes, double eps, std::size_t k);

/// Closed loop between two crossings (crossing points included), resampled to
/// n_points vertices of uniform arclength. Throws DegenerateCycle for loops with
/// fewer than 3 distinct points or arclength below 4 * h.
geometry::Contour extract_cycle(std::span<const Vec2> positions, const CrossingRecord& first,
                                const CrossingRecord& last, std::size_t n_points, double h);

struct TrackerConfig {
  std::size_t warmup = 50;
  double eps = 2.0;
  std::size_t k = 2;
};

/// Incremental section placement, crossing detection and convergence test over
/// a growing trajectory. A crossing is recorded only once the trajectory has
/// wound at least pi around the anchor since the previous record, so a path
/// that grazes the ray back and forth yields one record per revolution.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg) : cfg_(cfg) {}

  /// Feeds the next position; returns true once the criterion has fired.
  bool push(Vec2 position);

  bool done() const { return done_; }
  const std::optional<PoincareSection>& section() const { return section_; }
  const std::vector<CrossingRecord>& crossings() const { return crossings_; }
  const std::vector<double>& magnitudes() const { return magnitudes_; }
  const std::vector<Vec2>& positions() const { return positions_; }

 private:
  TrackerConfig cfg_;
  std::vector<Vec2> positions_;
  std::optional<PoincareSection> section_;
  std::size_t section_index_ = 0;
  std::vector<CrossingRecord> crossings_;
  std::vector<double> magnitudes_;
  double winding_ = 0.0;          // unwrapped angle swept around the anchor
  double last_winding_ = 0.0;     // winding at the previous record
  bool done_ = false;
};

}  // namespace dpm::poincare
