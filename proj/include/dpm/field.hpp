#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpm/common.hpp"

// Customized dynamic: a planar vector field built from a binary label whose
// attracting limit cycle is the label boundary.
namespace dpm::field {

/// Row-major indices of foreground pixels that touch the background through a
/// 4-neighbour or lie on the image border. Sorted ascending.
/// Throws AllForeground / AllBackground for single-class masks.
std::vector<std::int32_t> extract_boundary(const BinaryMask& mask);

/// Width of the Gaussian applied to s before the normal is differentiated.
/// Raw central differences of a pixel-quantized s only resolve a handful of
/// directions next to the boundary staircase.
inline constexpr double kGradientSigma = 1.5;

struct DistanceField {
  Grid<double> d;                     // unsigned distance to the boundary set (px)
  Grid<std::int32_t> nearest;         // row-major index of the nearest boundary pixel
  Grid<double> s;                     // signed distance, positive inside
  Grid<double> s_smooth;              // s after a Gaussian blur of kGradientSigma px
  std::vector<std::int32_t> boundary; // sorted boundary pixel indices

  int width() const { return d.width(); }
  int height() const { return d.height(); }
};

/// Exact Euclidean distance transform to the boundary pixel set.
///
/// Separable two-pass squared-distance transform: a per-column pass finds the
/// nearest boundary row, then a per-row lower envelope of parabolas resolves
/// the full 2D minimum. The envelope is computed over integer query points in
/// exact integer arithmetic and orders tied candidates by boundary-pixel
/// index, so `nearest` is the smallest row-major index among all minimizers.
DistanceField distance_transform(const BinaryMask& mask, Exec exec = Exec::Parallel);

/// pi * (1 - sigmoid(s)).
double rotation_angle(double s);

inline Vec2 rotate_vector(Vec2 v, double theta) { return rotate(v, theta); }

struct Attraction {
  Vec2 u;                 // unit outward normal, or (0, 0) when singular
  bool singular = false;
};

/// Outward normal direction normalize(-grad s) by central differences of
/// s_smooth (one-sided at the image border).
/// Falls back to the nearest-boundary direction where |grad s| < 0.1; pixels
/// whose nearest boundary pixel is itself or is not unique are singular.
Attraction attraction_direction(const DistanceField& df, int x, int y);

struct FieldBundle {
  Grid<double> s;
  Grid<double> theta;
  Grid<Vec2> v;
  Grid<std::uint8_t> singular;

  int width() const { return s.width(); }
  int height() const { return s.height(); }
};

/// v(p) = R(theta(s(p))) u(p) for every pixel.
FieldBundle build_dynamic(const BinaryMask& mask, Exec exec = Exec::Parallel);
FieldBundle build_dynamic(const DistanceField& df, Exec exec = Exec::Parallel);

/// Bilinear interpolation of v; pixel (i, j) is centred at (i, j).
/// Throws OutOfBounds outside [0, W-1] x [0, H-1].
Vec2 sample_field(const FieldBundle& fb, Vec2 pos);

/// "DPMVF1 <W> <H>\n" followed by W*H records of four little-endian float32
/// values (s, theta, vx, vy) and one singular byte.
void save_field(const FieldBundle& fb, const std::string& path);
FieldBundle load_field(const std::string& path);

}  // namespace dpm::field
