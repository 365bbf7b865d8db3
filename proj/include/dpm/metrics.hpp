#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpm/common.hpp"
#include "dpm/geometry.hpp"

// Segmentation quality metrics and mean(std) aggregation.
namespace dpm::metrics {

/// Even-odd scanline fill; pixel (i, j) is set iff its centre is inside the
/// polygon or on its boundary. Throws DegenerateContour for fewer than 3
/// vertices or zero area.
BinaryMask rasterize(const geometry::Contour& contour, int width, int height);

/// Ordered centres of the outer boundary pixels of the first foreground
/// component in raster order (Moore-neighbour tracing).
geometry::Contour mask_contour(const BinaryMask& mask);

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Throws DimensionMismatch.
Confusion confusion(const BinaryMask& pred, const BinaryMask& truth, Exec exec = Exec::Parallel);

// Ratios are undefined (nullopt) when their denominator is zero.
std::optional<double> dice(const Confusion& c);
std::optional<double> sensitivity(const Confusion& c);
std::optional<double> specificity(const Confusion& c);
std::optional<double> ppv(const Confusion& c);
std::optional<double> npv(const Confusion& c);

/// Symmetrized mean point-to-polyline distance over 100 resampled points per
/// contour, in mm.
double apd(const geometry::Contour& a, const geometry::Contour& b, double spacing_mm);

inline constexpr double kGoodApdMm = 5.0;

struct MetricsReport {
  std::optional<double> dice;
  double apd_mm = 0.0;
  bool good = false;
  std::optional<double> sensitivity, specificity, ppv, npv;
};

MetricsReport evaluate(const geometry::Contour& pred, const BinaryMask& truth, double spacing_mm);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

struct Aggregate {
  std::optional<Stat> dice, apd_mm, sensitivity, specificity, ppv, npv;
  double good_rate_pct = 0.0;
  std::size_t cases = 0;
};

/// Throws EmptyList.
Aggregate aggregate(std::span<const MetricsReport> reports);

/// "mean(std)" with fixed decimals, e.g. "0.92(0.02)".
std::string format_mean_std(const Stat& s, int decimals = 2);

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const Aggregate& a);
nlohmann::json report_json(std::span<const MetricsReport> cases);

}  // namespace dpm::metrics
