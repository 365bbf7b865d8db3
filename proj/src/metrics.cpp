#include "dpm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace dpm::metrics {

BinaryMask rasterize(const geometry::Contour& contour, int width, int height) {
  if (contour.size() < 3) throw Error(Errc::DegenerateContour, "contour needs at least 3 vertices");
  if (std::abs(geometry::signed_area(contour)) < 1e-12) {
    throw Error(Errc::DegenerateContour, "contour encloses zero area");
  }
  BinaryMask mask(width, height, 0);
  const std::size_t n = contour.size();
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    xs.clear();
    const double fy = y;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = contour[i];
      const Vec2 b = contour[(i + 1) % n];
      if ((a.y <= fy && b.y > fy) || (b.y <= fy && a.y > fy)) {
        xs.push_back(a.x + (fy - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
      const int x1 = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1])));
      for (int x = x0; x <= x1; ++x) mask(x, y) = 1;
    }
  }

  // Centres lying exactly on an edge count as inside.
  constexpr double kOnEdge = 1e-9;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = contour[i];
    const Vec2 b = contour[(i + 1) % n];
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min(a.y, b.y) - kOnEdge)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(std::max(a.y, b.y) + kOnEdge)));
    for (int y = y0; y <= y1; ++y) {
      if (a.y == b.y) {
        if (std::abs(a.y - y) > kOnEdge) continue;
        const int x0 = std::max(0, static_cast<int>(std::ceil(std::min(a.x, b.x) - kOnEdge)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(std::max(a.x, b.x) + kOnEdge)));
        for (int x = x0; x <= x1; ++x) mask(x, y) = 1;
      } else {
        const double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
        const double rx = std::round(x);
        if (std::abs(x - rx) <= kOnEdge && rx >= 0 && rx < width) mask(static_cast<int>(rx), y) = 1;
      }
    }
  }
  return mask;
}

geometry::Contour mask_contour(const BinaryMask& mask) {
  // Clockwise in image coordinates (y down), starting east.
  static constexpr std::array<std::array<int, 2>, 8> kDirs{
      {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
  auto fg = [&](int x, int y) { return mask.contains(x, y) && mask(x, y) != 0; };
  auto dir_index = [](int dx, int dy) {
    for (int i = 0; i < 8; ++i) {
      if (kDirs[static_cast<std::size_t>(i)][0] == dx && kDirs[static_cast<std::size_t>(i)][1] == dy) return i;
    }
    return -1;
  };

  int sx = -1, sy = -1;
  for (int y = 0; y < mask.height() && sx < 0; ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) {
        sx = x;
        sy = y;
        break;
      }
    }
  }
  if (sx < 0) throw Error(Errc::AllBackground, "mask has no foreground");

  geometry::Contour out{{static_cast<double>(sx), static_cast<double>(sy)}};
  int cx = sx, cy = sy;
  int back = 4;  // the west neighbour of the raster-first pixel is background
  const int start_back = back;
  const std::size_t limit = 4 * mask.size() + 8;
  for (std::size_t iter = 0; iter < limit; ++iter) {
    int found = -1;
    for (int i = 1; i <= 8; ++i) {
      const int d = (back + i) % 8;
      if (fg(cx + kDirs[static_cast<std::size_t>(d)][0], cy + kDirs[static_cast<std::size_t>(d)][1])) {
        found = d;
        break;
      }
    }
    if (found < 0) return out;  // isolated pixel
    // The last background neighbour examined becomes the backtrack of the new pixel.
    const auto& prev = kDirs[static_cast<std::size_t>((found + 7) % 8)];
    const auto& move = kDirs[static_cast<std::size_t>(found)];
    cx += move[0];
    cy += move[1];
    back = dir_index(prev[0] - move[0], prev[1] - move[1]);
    if (cx == sx && cy == sy && back == start_back) return out;
    out.push_back({static_cast<double>(cx), static_cast<double>(cy)});
  }
  return out;
}

Confusion confusion(const BinaryMask& pred, const BinaryMask& truth, Exec exec) {
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw Error(Errc::DimensionMismatch, "prediction and truth dimensions differ");
  }
  const int h = pred.height();
  std::vector<Confusion> rows(static_cast<std::size_t>(h));
  for_each_index(exec, h, [&](std::int64_t yi) {
    const int y = static_cast<int>(yi);
    Confusion c;
    for (int x = 0; x < pred.width(); ++x) {
      const bool p = pred(x, y) != 0;
      const bool t = truth(x, y) != 0;
      c.tp += p && t;
      c.fp += p && !t;
      c.tn += !p && !t;
      c.fn += !p && t;
    }
    rows[static_cast<std::size_t>(y)] = c;
  });
  Confusion total;
  for (const auto& c : rows) {
    total.tp += c.tp;
    total.fp += c.fp;
    total.tn += c.tn;
    total.fn += c.fn;
  }
  return total;
}

namespace {
std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

std::optional<double> dice(const Confusion& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }
std::optional<double> sensitivity(const Confusion& c) { return ratio(c.tp, c.tp + c.fn); }
std::optional<double> specificity(const Confusion& c) { return ratio(c.tn, c.tn + c.fp); }
std::optional<double> ppv(const Confusion& c) { return ratio(c.tp, c.tp + c.fp); }
std::optional<double> npv(const Confusion& c) { return ratio(c.tn, c.tn + c.fn); }

double apd(const geometry::Contour& a, const geometry::Contour& b, double spacing_mm) {
  if (a.size() < 3 || b.size() < 3 || geometry::perimeter(a) <= 0.0 || geometry::perimeter(b) <= 0.0) {
    throw Error(Errc::DegenerateContour, "APD needs closed contours with at least 3 vertices");
  }
  if (!(spacing_mm > 0.0)) throw Error(Errc::BadConfig, "pixel spacing must be positive");
  const auto ra = geometry::resample_closed(a, 100);
  const auto rb = geometry::resample_closed(b, 100);
  auto mean_dist = [](const geometry::Contour& from, const geometry::Contour& to) {
    double sum = 0.0;
    for (const Vec2& p : from) sum += geometry::point_polyline_distance(p, to);
    return sum / static_cast<double>(from.size());
  };
  return spacing_mm * 0.5 * (mean_dist(ra, b) + mean_dist(rb, a));
}

MetricsReport evaluate(const geometry::Contour& pred, const BinaryMask& truth, double spacing_mm) {
  const auto pred_mask = rasterize(pred, truth.width(), truth.height());
  const auto c = confusion(pred_mask, truth, Exec::Serial);
  MetricsReport r;
  r.dice = dice(c);
  r.sensitivity = sensitivity(c);
  r.specificity = specificity(c);
  r.ppv = ppv(c);
  r.npv = npv(c);
  r.apd_mm = apd(pred, mask_contour(truth), spacing_mm);
  r.good = r.apd_mm < kGoodApdMm;
  return r;
}

namespace {

std::optional<Stat> stat_of(std::span<const MetricsReport> reports,
                            std::optional<double> (*get)(const MetricsReport&)) {
  Stat s;
  double sum = 0.0;
  for (const auto& r : reports) {
    if (auto v = get(r)) {
      sum += *v;
      ++s.count;
    }
  }
  if (s.count == 0) return std::nullopt;
  s.mean = sum / static_cast<double>(s.count);
  double var = 0.0;
  for (const auto& r : reports) {
    if (auto v = get(r)) var += (*v - s.mean) * (*v - s.mean);
  }
  s.std = std::sqrt(var / static_cast<double>(s.count));
  return s;
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json stat_json(const std::optional<Stat>& s) {
  if (!s) return nullptr;
  return {{"mean", s->mean}, {"std", s->std}, {"count", s->count}, {"formatted", format_mean_std(*s)}};
}

}  // namespace

Aggregate aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw Error(Errc::EmptyList, "nothing to aggregate");
  Aggregate a;
  a.cases = reports.size();
  a.dice = stat_of(reports, [](const MetricsReport& r) { return r.dice; });
  a.apd_mm = stat_of(reports, [](const MetricsReport& r) -> std::optional<double> { return r.apd_mm; });
  a.sensitivity = stat_of(reports, [](const MetricsReport& r) { return r.sensitivity; });
  a.specificity = stat_of(reports, [](const MetricsReport& r) { return r.specificity; });
  a.ppv = stat_of(reports, [](const MetricsReport& r) { return r.ppv; });
  a.npv = stat_of(reports, [](const MetricsReport& r) { return r.npv; });
  const auto good = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.good; });
  a.good_rate_pct = 100.0 * static_cast<double>(good) / static_cast<double>(reports.size());
  return a;
}

std::string format_mean_std(const Stat& s, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f(%.*f)", decimals, s.mean, decimals, s.std);
  return buf;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"dice", opt_json(r.dice)},
          {"apd_mm", r.apd_mm},
          {"good", r.good},
          {"sensitivity", opt_json(r.sensitivity)},
          {"specificity", opt_json(r.specificity)},
          {"ppv", opt_json(r.ppv)},
          {"npv", opt_json(r.npv)}};
}

nlohmann::json to_json(const Aggregate& a) {
  return {{"dice", stat_json(a.dice)},
          {"apd_mm", stat_json(a.apd_mm)},
          {"sensitivity", stat_json(a.sensitivity)},
          {"specificity", stat_json(a.specificity)},
          {"ppv", stat_json(a.ppv)},
          {"npv", stat_json(a.npv)},
          {"good_rate_pct", a.good_rate_pct},
          {"cases", a.cases}};
}

nlohmann::json report_json(std::span<const MetricsReport> cases) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : cases) arr.push_back(to_json(r));
  return {{"cases", arr}, {"aggregate", to_json(aggregate(cases))}};
}

}  // namespace dpm::metrics
