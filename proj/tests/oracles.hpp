#pragma once
// Straightforward reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "dpm/common.hpp"
#include "dpm/geometry.hpp"
#include "dpm/model.hpp"

namespace oracle {

using dpm::BinaryMask;
using dpm::Vec2;

inline bool is_boundary(const BinaryMask& m, int x, int y) {
  if (!m(x, y)) return false;
  if (x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1) return true;
  return !m(x - 1, y) || !m(x + 1, y) || !m(x, y - 1) || !m(x, y + 1);
}

struct BruteEdt {
  std::vector<std::int64_t> d2;
  std::vector<std::int32_t> nearest;
};

// Minimum squared distance to every boundary pixel; first minimizer in
// row-major order wins.
inline BruteEdt brute_edt(const BinaryMask& m) {
  std::vector<std::int32_t> boundary;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (is_boundary(m, x, y)) boundary.push_back(y * m.width() + x);
  BruteEdt out;
  out.d2.assign(m.size(), std::numeric_limits<std::int64_t>::max());
  out.nearest.assign(m.size(), -1);
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const auto i = m.index(x, y);
      for (const auto b : boundary) {
        const std::int64_t dx = x - b % m.width();
        const std::int64_t dy = y - b / m.width();
        const std::int64_t d2 = dx * dx + dy * dy;
        if (d2 < out.d2[i]) {
          out.d2[i] = d2;
          out.nearest[i] = b;
        }
      }
    }
  }
  return out;
}

inline BinaryMask random_mask(int w, int h, double p_fg, std::mt19937_64& rng) {
  std::bernoulli_distribution fg(p_fg);
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = fg(rng) ? 1 : 0;
  return m;
}

inline BinaryMask disk_mask(int w, int h, Vec2 c, double r) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(x, y) = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= r * r ? 1 : 0;
  return m;
}

inline dpm::geometry::Contour circle_polygon(Vec2 c, double r, int n, double phase = 0.0) {
  dpm::geometry::Contour out;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * dpm::kPi * i / n;
    out.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return out;
}

// Crossing-number test; points on an edge count as inside.
inline bool point_in_polygon(Vec2 p, const dpm::geometry::Contour& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % n];
    const double cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cr) < 1e-9 && p.x >= std::min(a.x, b.x) - 1e-9 && p.x <= std::max(a.x, b.x) + 1e-9 &&
        p.y >= std::min(a.y, b.y) - 1e-9 && p.y <= std::max(a.y, b.y) + 1e-9)
      return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

inline double orient(Vec2 a, Vec2 b, Vec2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

// Proper or touching intersection of closed segments.
inline bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  auto on = [](Vec2 a, Vec2 b, Vec2 c) {
    return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= c.y &&
           c.y <= std::max(a.y, b.y);
  };
  return (d1 == 0 && on(q1, q2, p1)) || (d2 == 0 && on(q1, q2, p2)) || (d3 == 0 && on(p1, p2, q1)) ||
         (d4 == 0 && on(p1, p2, q2));
}

inline bool is_simple_polygon(const dpm::geometry::Contour& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent edges share a vertex
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

// Layer-by-layer evaluation with plain nested loops over a [c][y][x] tensor.
// Parameter layout: conv weight (o, (ky*k + kx)*in_c + c) stored column-major
// with out_c rows; dense weight (o, i) column-major; flatten order is
// (y*W + x)*C + c.
inline Vec2 naive_forward(const dpm::model::Architecture& arch, const std::vector<double>& params,
                          const std::vector<double>& patch) {
  using dpm::model::LayerKind;
  int c = 1, h = arch.input_size, w = arch.input_size;
  std::vector<double> t = patch;  // index (ch*h + y)*w + x
  std::vector<double> flat;
  bool is_flat = false;
  std::size_t off = 0;
  for (const auto& l : arch.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        const int k = l.kernel, s = l.stride, oc = l.channels;
        const int oh = (h - k) / s + 1, ow = (w - k) / s + 1;
        const int fan_in = k * k * c;
        const std::size_t woff = off, boff = off + static_cast<std::size_t>(fan_in) * oc;
        std::vector<double> out(static_cast<std::size_t>(oc) * oh * ow);
        for (int o = 0; o < oc; ++o)
          for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
              double acc = params[boff + o];
              for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx)
                  for (int ci = 0; ci < c; ++ci) {
                    const int col = (ky * k + kx) * c + ci;
                    acc += params[woff + static_cast<std::size_t>(col) * oc + o] *
                           t[(static_cast<std::size_t>(ci) * h + (y * s + ky)) * w + (x * s + kx)];
                  }
              out[(static_cast<std::size_t>(o) * oh + y) * ow + x] = acc;
            }
        off = boff + oc;
        t = std::move(out);
        c = oc;
        h = oh;
        w = ow;
        break;
      }
      case LayerKind::ReLU:
        if (is_flat) {
          for (double& v : flat) v = std::max(v, 0.0);
        } else {
          for (double& v : t) v = std::max(v, 0.0);
        }
        break;
      case LayerKind::MaxPool: {
        const int oh = h / 2, ow = w / 2;
        std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
        for (int ci = 0; ci < c; ++ci)
          for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
              double m = -std::numeric_limits<double>::infinity();
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                  m = std::max(m, t[(static_cast<std::size_t>(ci) * h + 2 * y + dy) * w + 2 * x + dx]);
              out[(static_cast<std::size_t>(ci) * oh + y) * ow + x] = m;
            }
        t = std::move(out);
        h = oh;
        w = ow;
        break;
      }
      case LayerKind::Flatten:
        flat.assign(static_cast<std::size_t>(c) * h * w, 0.0);
        for (int ci = 0; ci < c; ++ci)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              flat[static_cast<std::size_t>(y * w + x) * c + ci] = t[(static_cast<std::size_t>(ci) * h + y) * w + x];
        is_flat = true;
        break;
      case LayerKind::Dense: {
        const int n_in = static_cast<int>(flat.size()), n_out = l.units;
        const std::size_t woff = off, boff = off + static_cast<std::size_t>(n_in) * n_out;
        std::vector<double> out(static_cast<std::size_t>(n_out));
        for (int o = 0; o < n_out; ++o) {
          double acc = params[boff + o];
          for (int i = 0; i < n_in; ++i) acc += params[woff + static_cast<std::size_t>(i) * n_out + o] * flat[i];
          out[o] = acc;
        }
        off = boff + n_out;
        flat = std::move(out);
        break;
      }
    }
  }
  return {flat[0], flat[1]};
}

}  // namespace oracle
