#include "dpm/synth.hpp"

#include <algorithm>
#include <cmath>

namespace dpm::synth {
namespace {

const char* family_name(Family f) {
  switch (f) {
    case Family::Circle: return "circle";
    case Family::Ellipse: return "ellipse";
    case Family::Blob: return "blob";
  }
  return "?";
}

Family family_from(const std::string& s) {
  if (s == "circle") return Family::Circle;
  if (s == "ellipse") return Family::Ellipse;
  if (s == "blob") return Family::Blob;
  throw Error(Errc::BadConfig, "unknown shape family '" + s + "'");
}

void check_spec(const ShapeSpec& s) {
  auto bad = [](const std::string& why) { throw Error(Errc::SpecInfeasible, why); };
  if (s.width <= 0 || s.height <= 0) bad("image dimensions must be positive");
  if (!(s.r_min > 0.0) || s.r_max < s.r_min) bad("need 0 < r_min <= r_max");
  if (s.family == Family::Ellipse && !(s.aspect_min > 0.0 && s.aspect_min <= 1.0)) bad("aspect_min in (0, 1]");
  if (s.family == Family::Blob && (s.harmonics < 0 || s.amplitude < 0.0 || s.amplitude > 0.35)) {
    bad("blob needs harmonics >= 0 and amplitude in [0, 0.35]");
  }
  for (double m : {s.fg_mean, s.bg_mean}) {
    if (!(m >= 0.0 && m <= 1.0)) bad("intensity means must lie in [0, 1]");
  }
  if (s.noise_sigma < 0.0 || s.blur_sigma < 0.0) bad("sigmas must be non-negative");
  if (!(s.spacing_mm > 0.0)) bad("spacing must be positive");
}

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  return k;
}

Grid<double> blur(const Grid<double>& in, double sigma) {
  if (sigma <= 0.0) return in;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = in.width();
  const int h = in.height();
  Grid<double> tmp(w, h);
  Grid<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * in(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

nlohmann::json ShapeSpec::to_json() const {
  return {{"family", family_name(family)}, {"width", width},           {"height", height},
          {"r_min", r_min},                {"r_max", r_max},           {"aspect_min", aspect_min},
          {"harmonics", harmonics},        {"amplitude", amplitude},   {"fg_mean", fg_mean},
          {"bg_mean", bg_mean},            {"noise_sigma", noise_sigma}, {"blur_sigma", blur_sigma},
          {"seed", seed},                  {"patch_size", patch_size}, {"spacing_mm", spacing_mm}};
}

ShapeSpec ShapeSpec::from_json(const nlohmann::json& j) {
  ShapeSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "family") s.family = family_from(value.get<std::string>());
      else if (key == "width") s.width = value.get<int>();
      else if (key == "height") s.height = value.get<int>();
      else if (key == "r_min") s.r_min = value.get<double>();
      else if (key == "r_max") s.r_max = value.get<double>();
      else if (key == "aspect_min") s.aspect_min = value.get<double>();
      else if (key == "harmonics") s.harmonics = value.get<int>();
      else if (key == "amplitude") s.amplitude = value.get<double>();
      else if (key == "fg_mean") s.fg_mean = value.get<double>();
      else if (key == "bg_mean") s.bg_mean = value.get<double>();
      else if (key == "noise_sigma") s.noise_sigma = value.get<double>();
      else if (key == "blur_sigma") s.blur_sigma = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "patch_size") s.patch_size = value.get<int>();
      else if (key == "spacing_mm") s.spacing_mm = value.get<double>();
      else throw Error(Errc::BadConfig, "unknown shape spec key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, e.what());
  }
  return s;
}

double Shape::radius_at(double phi) const {
  switch (family) {
    case Family::Circle:
      return radius;
    case Family::Ellipse: {
      const double c = std::cos(phi - angle);
      const double s = std::sin(phi - angle);
      return radius * minor / std::sqrt(minor * c * minor * c + radius * s * radius * s);
    }
    case Family::Blob: {
      double f = 1.0;
      for (std::size_t k = 0; k < amp.size(); ++k) f += amp[k] * std::sin(static_cast<double>(k + 2) * phi + phase[k]);
      return radius * f;
    }
  }
  return radius;
}

bool Shape::contains(Vec2 p) const {
  const Vec2 d = p - center;
  const double rho2 = d.x * d.x + d.y * d.y;
  switch (family) {
    case Family::Circle:
      return rho2 <= radius * radius;
    case Family::Ellipse: {
      const Vec2 q = rotate(d, -angle);
      return (q.x * q.x) / (radius * radius) + (q.y * q.y) / (minor * minor) <= 1.0;
    }
    case Family::Blob: {
      const double r = radius_at(std::atan2(d.y, d.x));
      return rho2 <= r * r;
    }
  }
  return false;
}

double Shape::max_extent() const {
  if (family == Family::Blob) {
    double s = 0.0;
    for (double a : amp) s += std::abs(a);
    return radius * (1.0 + s);
  }
  return radius;
}

geometry::Contour Shape::outline(std::size_t n) const {
  geometry::Contour c;
  c.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    c.push_back(center + radius_at(phi) * unit_from_angle(phi));
  }
  return c;
}

Shape gen_shape(const ShapeSpec& spec, std::mt19937_64& rng) {
  check_spec(spec);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Shape shape;
  shape.family = spec.family;
  shape.radius = spec.r_min + (spec.r_max - spec.r_min) * unit(rng);
  if (spec.family == Family::Ellipse) {
    shape.minor = shape.radius * (spec.aspect_min + (1.0 - spec.aspect_min) * unit(rng));
    shape.angle = kPi * unit(rng);
  } else if (spec.family == Family::Blob && spec.harmonics > 0) {
    double total = 0.0;
    for (int k = 0; k < spec.harmonics; ++k) {
      shape.amp.push_back(2.0 * unit(rng) - 1.0);
      shape.phase.push_back(2.0 * kPi * unit(rng));
      total += std::abs(shape.amp.back());
    }
    for (double& a : shape.amp) a = total > 0.0 ? a * spec.amplitude / total : 0.0;
  }

  const double margin = spec.patch_size / 2.0 + 8.0;
  const double reach = shape.max_extent() + margin;
  const double lo_x = reach, hi_x = spec.width - 1 - reach;
  const double lo_y = reach, hi_y = spec.height - 1 - reach;
  if (lo_x > hi_x || lo_y > hi_y) {
    throw Error(Errc::SpecInfeasible, "shape of extent " + std::to_string(shape.max_extent()) +
                                          " px does not fit with the border margin");
  }
  shape.center = {lo_x + (hi_x - lo_x) * unit(rng), lo_y + (hi_y - lo_y) * unit(rng)};
  return shape;
}

BinaryMask rasterize_shape(const Shape& shape, int width, int height) {
  BinaryMask mask(width, height, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      mask(x, y) = shape.contains({static_cast<double>(x), static_cast<double>(y)}) ? 1 : 0;
    }
  }
  return mask;
}

BinaryMask gen_mask(const ShapeSpec& spec, std::mt19937_64& rng) {
  return rasterize_shape(gen_shape(spec, rng), spec.width, spec.height);
}

GrayImage render_image(const BinaryMask& mask, const ShapeSpec& spec, std::mt19937_64& rng) {
  check_spec(spec);
  Grid<double> base(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) base[i] = mask[i] ? spec.fg_mean : spec.bg_mean;
  base = blur(base, spec.blur_sigma);
  GrayImage img{Grid<float>(mask.width(), mask.height()), spec.spacing_mm};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < base.size(); ++i) {
    double v = base[i];
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
    v = std::clamp(v, 0.0, 1.0);
    img.pixels[i] = static_cast<float>(std::round(v * 255.0) / 255.0);
  }
  return img;
}

std::vector<Sample> gen_dataset(std::size_t n, const ShapeSpec& spec, Exec exec) {
  if (n == 0) throw Error(Errc::SpecInfeasible, "dataset size must be at least 1");
  check_spec(spec);
  std::vector<Sample> out(n);
  for_each_index(exec, static_cast<std::int64_t>(n), [&](std::int64_t i) {
    std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    Sample s;
    s.shape = gen_shape(spec, rng);
    s.mask = rasterize_shape(s.shape, spec.width, spec.height);
    s.image = render_image(s.mask, spec, rng);
    out[static_cast<std::size_t>(i)] = std::move(s);
  });
  return out;
}

Vec2 mask_centroid(const BinaryMask& mask) {
  Vec2 sum;
  std::size_t count = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) {
        sum += Vec2{static_cast<double>(x), static_cast<double>(y)};
        ++count;
      }
    }
  }
  if (count == 0) throw Error(Errc::AllBackground, "mask has no foreground");
  return (1.0 / static_cast<double>(count)) * sum;
}

}  // namespace dpm::synth
