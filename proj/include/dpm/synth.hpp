#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpm/common.hpp"
#include "dpm/geometry.hpp"

// Synthetic (image, mask) pairs: circles, ellipses and star-shaped Fourier blobs.
namespace dpm::synth {

enum class Family { Circle, Ellipse, Blob };

struct ShapeSpec {
  Family family = Family::Blob;
  int width = 256;
  int height = 256;
  double r_min = 30.0;       // px; base radius (circle, blob) or semi-major axis (ellipse)
  double r_max = 50.0;
  double aspect_min = 0.6;   // ellipse minor / major
  int harmonics = 3;         // blob harmonics k = 2 .. harmonics + 1
  double amplitude = 0.25;   // blob: sum of |a_k|, at most 0.35
  double fg_mean = 0.75;
  double bg_mean = 0.25;
  double noise_sigma = 0.05;
  double blur_sigma = 1.0;
  std::uint64_t seed = 0;
  int patch_size = 64;       // margin rule: P/2 + 8 px from every border
  double spacing_mm = 1.0;

  nlohmann::json to_json() const;
  static ShapeSpec from_json(const nlohmann::json& j);
};

struct Shape {
  Family family = Family::Circle;
  Vec2 center;
  double radius = 0.0;        // circle / blob base radius, ellipse semi-major axis
  double minor = 0.0;         // ellipse semi-minor axis
  double angle = 0.0;         // ellipse orientation
  std::vector<double> amp;    // blob harmonic amplitudes
  std::vector<double> phase;

  /// Boundary radius along direction phi (all families are star-shaped).
  double radius_at(double phi) const;
  bool contains(Vec2 p) const;
  double max_extent() const;
  geometry::Contour outline(std::size_t n) const;
};

/// Throws SpecInfeasible when the margin rule cannot be met or parameters are
/// out of their domain.
Shape gen_shape(const ShapeSpec& spec, std::mt19937_64& rng);
BinaryMask rasterize_shape(const Shape& shape, int width, int height);
BinaryMask gen_mask(const ShapeSpec& spec, std::mt19937_64& rng);

/// Foreground/background means, Gaussian blur, additive Gaussian noise, then
/// clamping to [0, 1] and quantization to 8 bits so PGM round trips are lossless.
GrayImage render_image(const BinaryMask& mask, const ShapeSpec& spec, std::mt19937_64& rng);

struct Sample {
  GrayImage image;
  BinaryMask mask;
  Shape shape;
};

/// Even indices form the training split, odd indices the test split.
inline bool is_train_index(std::size_t i) { return i % 2 == 0; }

/// Pair i is generated from derive_seed(spec.seed, i).
std::vector<Sample> gen_dataset(std::size_t n, const ShapeSpec& spec, Exec exec = Exec::Parallel);

/// Centroid of the foreground pixels.
Vec2 mask_centroid(const BinaryMask& mask);

}  // namespace dpm::synth
