#include "dpm/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dpm::poincare {

PoincareSection place_section(std::span<const Vec2> prefix, std::size_t warmup) {
  if (warmup == 0 || prefix.size() < warmup) {
    throw Error(Errc::InsufficientPrefix, "need " + std::to_string(warmup) + " positions, have " +
                                              std::to_string(prefix.size()));
  }
  Vec2 anchor;
  for (std::size_t i = prefix.size() - warmup; i < prefix.size(); ++i) anchor += prefix[i];
  anchor *= 1.0 / static_cast<double>(warmup);
  const Vec2 to_latest = prefix.back() - anchor;
  const double len = norm(to_latest);
  // A prefix that has not moved has no preferred direction; any unit ray is transversal.
  const Vec2 direction = len > 0.0 ? (1.0 / len) * to_latest : Vec2{1.0, 0.0};
  return {anchor, direction, true};
}

std::optional<CrossingRecord> detect_crossing(Vec2 p0, Vec2 p1, const PoincareSection& section,
                                              std::int64_t step) {
  const double c0 = cross(section.direction, p0 - section.anchor);
  const double c1 = cross(section.direction, p1 - section.anchor);
  if (!(c0 < 0.0 && c1 >= 0.0)) return std::nullopt;
  const double lambda = c0 / (c0 - c1);
  const Vec2 point = p0 + lambda * (p1 - p0);
  const double t = dot(point - section.anchor, section.direction);
  if (!(t > 0.0)) return std::nullopt;
  return CrossingRecord{step, t, point};
}

std::vector<double> map_magnitudes(std::span<const CrossingRecord> crossings) {
  std::vector<double> out;
  for (std::size_t i = 1; i < crossings.size(); ++i) {
    out.push_back(std::abs(crossings[i].t_param - crossings[i - 1].t_param));
  }
  return out;
}

bool converged(std::span<const double> magnitudes, double eps, std::size_t k) {
  if (k == 0 || magnitudes.size() < k) return false;
  return std::all_of(magnitudes.end() - static_cast<std::ptrdiff_t>(k), magnitudes.end(),
                     [eps](double m) { return m <= eps; });
}

geometry::Contour extract_cycle(std::span<const Vec2> positions, const CrossingRecord& first,
                                const CrossingRecord& last, std::size_t n_points, double h) {
  if (first.step < 0 || last.step < first.step || static_cast<std::size_t>(last.step) >= positions.size()) {
    throw Error(Errc::DegenerateCycle, "crossing steps do not index the trajectory");
  }
  geometry::Contour loop{first.point};
  for (auto i = first.step + 1; i <= last.step; ++i) loop.push_back(positions[static_cast<std::size_t>(i)]);
  loop.push_back(last.point);

  std::vector<Vec2> distinct;
  for (const Vec2& p : loop) {
    if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) distinct.push_back(p);
    if (distinct.size() >= 3) break;
  }
  if (distinct.size() < 3) throw Error(Errc::DegenerateCycle, "loop has fewer than 3 distinct points");
  const double length = geometry::perimeter(loop);
  if (length < 4.0 * h) throw Error(Errc::DegenerateCycle, "loop arclength below 4h");
  return geometry::resample_closed(loop, n_points);
}

bool Tracker::push(Vec2 position) {
  positions_.push_back(position);
  if (done_) return true;
  const std::size_t n = positions_.size();
  if (!section_) {
    // Warm-up counts steps, so the section is placed once W + 1 positions exist.
    if (n == cfg_.warmup + 1) {
      section_ = place_section(positions_, cfg_.warmup);
      section_index_ = n - 1;
    }
    return false;
  }
  const std::size_t start = n - 2;
  if (start <= section_index_) return false;
  const Vec2 a = positions_[start] - section_->anchor;
  const Vec2 b = positions_[n - 1] - section_->anchor;
  winding_ += std::atan2(cross(a, b), dot(a, b));
  if (!crossings_.empty() && winding_ - last_winding_ < kPi) return false;
  if (auto rec = detect_crossing(positions_[start], positions_[n - 1], *section_,
                                 static_cast<std::int64_t>(start))) {
    last_winding_ = winding_;
    crossings_.push_back(*rec);
    if (crossings_.size() >= 2) {
      magnitudes_.push_back(std::abs(crossings_.back().t_param - crossings_[crossings_.size() - 2].t_param));
    }
    done_ = converged(magnitudes_, cfg_.eps, cfg_.k);
  }
  return done_;
}

}  // namespace dpm::poincare
