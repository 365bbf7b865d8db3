#include "dpm/field.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "dpm/binary.hpp"

namespace dpm::field {
namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

std::int64_t floor_div(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t num, std::int64_t den) { return -floor_div(-num, den); }

void check_mask(const BinaryMask& mask) {
  for (auto value : mask.data()) {
    if (value > 1) throw Error(Errc::NonBinaryMask, "mask values must be 0 or 1");
  }
}

// Separable Gaussian with clamped edges.
Grid<double> gaussian_blur(const Grid<double>& in, double sigma, Exec exec) {
  const int w = in.width();
  const int h = in.height();
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= total;
  Grid<double> tmp(w, h);
  Grid<double> out(w, h);
  for_each_index(exec, h, [&](std::int64_t yi) {
    const int y = static_cast<int>(yi);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * in(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = acc;
    }
  });
  for_each_index(exec, h, [&](std::int64_t yi) {
    const int y = static_cast<int>(yi);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = acc;
    }
  });
  return out;
}

}  // namespace

std::vector<std::int32_t> extract_boundary(const BinaryMask& mask) {
  check_mask(mask);
  const int w = mask.width();
  const int h = mask.height();
  std::size_t fg = 0;
  for (auto value : mask.data()) fg += value;
  if (fg == 0) throw Error(Errc::AllBackground, "mask has no foreground pixels");
  if (fg == mask.size()) throw Error(Errc::AllForeground, "mask has no background pixels");

  std::vector<std::int32_t> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      const bool on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      const bool touches_bg = on_border || !mask(x - 1, y) || !mask(x + 1, y) ||
                              !mask(x, y - 1) || !mask(x, y + 1);
      if (touches_bg) out.push_back(static_cast<std::int32_t>(mask.index(x, y)));
    }
  }
  return out;
}

DistanceField distance_transform(const BinaryMask& mask, Exec exec) {
  const int w = mask.width();
  const int h = mask.height();
  DistanceField df;
  df.boundary = extract_boundary(mask);
  df.d = Grid<double>(w, h);
  df.s = Grid<double>(w, h);
  df.nearest = Grid<std::int32_t>(w, h, -1);

  Grid<std::uint8_t> is_boundary(w, h, 0);
  for (auto idx : df.boundary) is_boundary[static_cast<std::size_t>(idx)] = 1;

  // Column pass: squared vertical distance and row of the nearest boundary
  // pixel in the same column. Equal distances above and below pick the row
  // above, which is also the smaller row-major index.
  Grid<std::int64_t> g2(w, h, kInf);
  Grid<std::int32_t> near_row(w, h, -1);
  for_each_index(exec, w, [&](std::int64_t xi) {
    const int x = static_cast<int>(xi);
    std::vector<int> above(static_cast<std::size_t>(h), -1);
    int last = -1;
    for (int y = 0; y < h; ++y) {
      if (is_boundary(x, y)) last = y;
      above[static_cast<std::size_t>(y)] = last;
    }
    int next = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (is_boundary(x, y)) next = y;
      const int a = above[static_cast<std::size_t>(y)];
      int best = -1;
      if (a >= 0 && next >= 0) {
        best = (y - a <= next - y) ? a : next;
      } else if (a >= 0) {
        best = a;
      } else {
        best = next;
      }
      if (best >= 0) {
        const std::int64_t dy = y - best;
        g2(x, y) = dy * dy;
        near_row(x, y) = best;
      }
    }
  });

  // Row pass: lower envelope of parabolas (q - j)^2 + g2(j) over integer q.
  // For columns i < j, j beats i on the integer half-line [T, inf); ties at
  // an integer q go to the smaller boundary index.
  for_each_index(exec, h, [&](std::int64_t yi) {
    const int y = static_cast<int>(yi);
    std::vector<int> hull;
    std::vector<std::int64_t> start;
    hull.reserve(static_cast<std::size_t>(w));
    start.reserve(static_cast<std::size_t>(w));
    auto key = [&](int col) {
      return static_cast<std::int64_t>(near_row(col, y)) * w + col;
    };
    for (int j = 0; j < w; ++j) {
      if (g2(j, y) >= kInf) continue;
      std::int64_t t = std::numeric_limits<std::int64_t>::min();
      while (!hull.empty()) {
        const int i = hull.back();
        const std::int64_t num = (static_cast<std::int64_t>(j) * j + g2(j, y)) -
                                 (static_cast<std::int64_t>(i) * i + g2(i, y));
        const std::int64_t den = 2 * static_cast<std::int64_t>(j - i);
        t = key(j) < key(i) ? ceil_div(num, den) : floor_div(num, den) + 1;
        if (t <= start.back()) {
          hull.pop_back();
          start.pop_back();
          t = std::numeric_limits<std::int64_t>::min();
        } else {
          break;
        }
      }
      hull.push_back(j);
      start.push_back(t);
    }
    std::size_t k = 0;
    for (int q = 0; q < w; ++q) {
      while (k + 1 < hull.size() && start[k + 1] <= q) ++k;
      const int col = hull[k];
      const std::int64_t dx = q - col;
      const std::int64_t dist2 = dx * dx + g2(col, y);
      const double d = std::sqrt(static_cast<double>(dist2));
      df.d(q, y) = d;
      df.s(q, y) = mask(q, y) ? d : -d;
      df.nearest(q, y) = static_cast<std::int32_t>(key(col));
    }
  });
  df.s_smooth = gaussian_blur(df.s, kGradientSigma, exec);
  return df;
}

double rotation_angle(double s) {
  // 1 - sigmoid(s) == sigmoid(-s); evaluated without overflow for large |s|.
  const double one_minus_sigmoid = s >= 0.0 ? std::exp(-s) / (1.0 + std::exp(-s))
                                            : 1.0 / (1.0 + std::exp(s));
  return kPi * one_minus_sigmoid;
}

Attraction attraction_direction(const DistanceField& df, int x, int y) {
  const int w = df.width();
  const int h = df.height();
  const auto& s = df.s_smooth;
  auto diff = [](double lo, double hi, double span) { return (hi - lo) / span; };
  double gx = 0.0;
  double gy = 0.0;
  if (w > 1) {
    if (x == 0) gx = diff(s(0, y), s(1, y), 1.0);
    else if (x == w - 1) gx = diff(s(w - 2, y), s(w - 1, y), 1.0);
    else gx = diff(s(x - 1, y), s(x + 1, y), 2.0);
  }
  if (h > 1) {
    if (y == 0) gy = diff(s(x, 0), s(x, 1), 1.0);
    else if (y == h - 1) gy = diff(s(x, h - 2), s(x, h - 1), 1.0);
    else gy = diff(s(x, y - 1), s(x, y + 1), 2.0);
  }
  const double gnorm = std::hypot(gx, gy);
  if (gnorm >= 0.1) return {{-gx / gnorm, -gy / gnorm}, false};

  // Near-zero gradient: medial axis or a tie. Use the nearest boundary pixel
  // only when it is unique and distinct from p.
  const std::int32_t n = df.nearest(x, y);
  const int nx = n % w;
  const int ny = n / w;
  const std::int64_t ddx = nx - x;
  const std::int64_t ddy = ny - y;
  const std::int64_t best = ddx * ddx + ddy * ddy;
  if (best == 0) return {{0.0, 0.0}, true};
  for (auto b : df.boundary) {
    if (b == n) continue;
    const std::int64_t bx = b % w - x;
    const std::int64_t by = b / w - y;
    if (bx * bx + by * by == best) return {{0.0, 0.0}, true};
  }
  const double len = std::sqrt(static_cast<double>(best));
  // Outward: toward the boundary from inside, away from it outside.
  const double sign = df.s(x, y) > 0.0 ? 1.0 : -1.0;
  return {{sign * static_cast<double>(ddx) / len, sign * static_cast<double>(ddy) / len}, false};
}

FieldBundle build_dynamic(const DistanceField& df, Exec exec) {
  const int w = df.width();
  const int h = df.height();
  FieldBundle fb;
  fb.s = df.s;
  fb.theta = Grid<double>(w, h);
  fb.v = Grid<Vec2>(w, h);
  fb.singular = Grid<std::uint8_t>(w, h, 0);
  for_each_index(exec, h, [&](std::int64_t yi) {
    const int y = static_cast<int>(yi);
    for (int x = 0; x < w; ++x) {
      const double theta = rotation_angle(df.s(x, y));
      const Attraction a = attraction_direction(df, x, y);
      fb.theta(x, y) = theta;
      fb.singular(x, y) = a.singular ? 1 : 0;
      fb.v(x, y) = a.singular ? Vec2{} : rotate_vector(a.u, theta);
    }
  });
  return fb;
}

FieldBundle build_dynamic(const BinaryMask& mask, Exec exec) {
  return build_dynamic(distance_transform(mask, exec), exec);
}

Vec2 sample_field(const FieldBundle& fb, Vec2 pos) {
  const int w = fb.width();
  const int h = fb.height();
  if (!(pos.x >= 0.0 && pos.y >= 0.0 && pos.x <= w - 1 && pos.y <= h - 1)) {
    std::ostringstream msg;
    msg << "position (" << pos.x << ", " << pos.y << ") outside " << w << "x" << h << " grid";
    throw Error(Errc::OutOfBounds, msg.str());
  }
  const int x0 = std::min(static_cast<int>(pos.x), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(pos.y), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = pos.x - x0;
  const double fy = pos.y - y0;
  const Vec2 top = (1.0 - fx) * fb.v(x0, y0) + fx * fb.v(x1, y0);
  const Vec2 bottom = (1.0 - fx) * fb.v(x0, y1) + fx * fb.v(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

void save_field(const FieldBundle& fb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
  out << "DPMVF1 " << fb.width() << " " << fb.height() << "\n";
  for (std::size_t i = 0; i < fb.s.size(); ++i) {
    binary::put_f32(out, static_cast<float>(fb.s[i]));
    binary::put_f32(out, static_cast<float>(fb.theta[i]));
    binary::put_f32(out, static_cast<float>(fb.v[i].x));
    binary::put_f32(out, static_cast<float>(fb.v[i].y));
    out.put(static_cast<char>(fb.singular[i]));
  }
  if (!out) throw Error(Errc::Io, "write failed for " + path);
}

FieldBundle load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  const std::string header = binary::read_line(in, "field header");
  std::istringstream hs(header);
  std::string magic;
  int w = 0;
  int h = 0;
  hs >> magic >> w >> h;
  if (magic != "DPMVF1") throw Error(Errc::BadMagic, "expected DPMVF1 in " + path);
  if (!hs || w <= 0 || h <= 0) throw Error(Errc::ShapeMismatch, "bad field dimensions in " + path);

  FieldBundle fb;
  fb.s = Grid<double>(w, h);
  fb.theta = Grid<double>(w, h);
  fb.v = Grid<Vec2>(w, h);
  fb.singular = Grid<std::uint8_t>(w, h, 0);
  std::vector<unsigned char> rec(17);
  for (std::size_t i = 0; i < fb.s.size(); ++i) {
    binary::read_exact(in, reinterpret_cast<char*>(rec.data()), rec.size(), "field records");
    fb.s[i] = binary::get_f32(&rec[0]);
    fb.theta[i] = binary::get_f32(&rec[4]);
    fb.v[i] = {binary::get_f32(&rec[8]), binary::get_f32(&rec[12])};
    fb.singular[i] = rec[16] ? 1 : 0;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::ShapeMismatch, "trailing bytes after field records in " + path);
  }
  return fb;
}

}  // namespace dpm::field
