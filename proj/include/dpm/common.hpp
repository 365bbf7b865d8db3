#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpm {

// x = column, y = row; angles are measured from +x toward +y.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double angle_of(Vec2 a) { return std::atan2(a.y, a.x); }
inline Vec2 unit_from_angle(double phi) { return {std::cos(phi), std::sin(phi)}; }

// Counterclockwise rotation in (x, y).
inline Vec2 rotate(Vec2 v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into (-pi, pi].
double wrap_angle(double phi);

/// Dense row-major raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static long long checked_area(int w, int h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("grid dimensions must be positive");
    return static_cast<long long>(w) * h;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Values are 0 or 1.
using BinaryMask = Grid<std::uint8_t>;

struct GrayImage {
  Grid<float> pixels;  // intensities in [0, 1]
  double spacing_mm = 1.0;

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
};

enum class Errc {
  AllForeground,
  AllBackground,
  OutOfBounds,
  DegenerateDirection,
  EmptyBand,
  BadArchitecture,
  ShapeMismatch,
  EmptyDataset,
  BadMagic,
  TruncatedFile,
  TooCloseToBorder,
  DegenerateStep,
  Stalled,
  NonConvergence,
  InsufficientPrefix,
  DegenerateCycle,
  DegenerateContour,
  DimensionMismatch,
  EmptyList,
  SpecInfeasible,
  BadMaxval,
  NonBinaryMask,
  NothingToRender,
  BadConfig,
  Io,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

enum class Exec { Serial, Parallel };

/// Runs body(i) for i in [0, n). The parallel path uses OpenMP with a static
/// schedule; the first exception thrown by any iteration is rethrown.
template <typename Body>
void for_each_index(Exec exec, std::int64_t n, Body&& body) {
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// splitmix64 finalizer; used to derive independent per-item seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(seed ^ mix_seed(index + 0x51ed270b27a4d3c1ULL));
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace dpm
