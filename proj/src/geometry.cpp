#include "dpm/geometry.hpp"

#include <algorithm>
#include <limits>

namespace dpm::geometry {

double perimeter(const Contour& c) {
  double len = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) len += norm(c[(i + 1) % c.size()] - c[i]);
  return len;
}

double signed_area(const Contour& c) {
  double a = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) a += cross(c[i], c[(i + 1) % c.size()]);
  return 0.5 * a;
}

Contour resample_closed(const Contour& c, std::size_t n) {
  Contour out;
  if (c.empty() || n == 0) return out;
  const double total = perimeter(c);
  out.reserve(n);
  if (total <= 0.0) {
    out.assign(n, c.front());
    return out;
  }
  std::size_t seg = 0;
  double seg_start = 0.0;
  double seg_len = norm(c[1 % c.size()] - c[0]);
  for (std::size_t k = 0; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg_start + seg_len < target && seg + 1 < c.size()) {
      seg_start += seg_len;
      ++seg;
      seg_len = norm(c[(seg + 1) % c.size()] - c[seg]);
    }
    const Vec2 a = c[seg];
    const Vec2 b = c[(seg + 1) % c.size()];
    const double u = seg_len > 0.0 ? std::clamp((target - seg_start) / seg_len, 0.0, 1.0) : 0.0;
    out.push_back(a + u * (b - a));
  }
  return out;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return norm(p - a);
  const double u = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + u * ab));
}

double point_polyline_distance(Vec2 p, const Contour& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i) {
    best = std::min(best, point_segment_distance(p, c[i], c[(i + 1) % c.size()]));
  }
  return best;
}

}  // namespace dpm::geometry
