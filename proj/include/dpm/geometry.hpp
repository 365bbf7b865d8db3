#pragma once

#include <cstddef>
#include <vector>

#include "dpm/common.hpp"

namespace dpm::geometry {

/// Closed polygon; the last vertex connects back to the first.
using Contour = std::vector<Vec2>;

double perimeter(const Contour& c);
double signed_area(const Contour& c);

/// n vertices at uniform arclength along the closed polygon, starting at c[0].
Contour resample_closed(const Contour& c, std::size_t n);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

/// Distance from p to the closed polyline c.
double point_polyline_distance(Vec2 p, const Contour& c);

}  // namespace dpm::geometry
