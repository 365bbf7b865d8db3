#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "dpm/field.hpp"
#include "oracles.hpp"

using namespace dpm;
using dpm::field::FieldBundle;

namespace {

BinaryMask circle_mask(double r, int size = 256, Vec2 c = {128, 128}) { return oracle::disk_mask(size, size, c, r); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dpm_field_" + name)).string();
}

Vec2 rk4(const FieldBundle& fb, Vec2 p, double h) {
  auto f = [&](Vec2 q) { return field::sample_field(fb, q); };
  const Vec2 k1 = f(p);
  const Vec2 k2 = f(p + 0.5 * h * k1);
  const Vec2 k3 = f(p + 0.5 * h * k2);
  const Vec2 k4 = f(p + h * k3);
  return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

TEST_CASE("extract_boundary") {
  SUBCASE("isolated pixel") {
    BinaryMask m(7, 7);
    m(3, 3) = 1;
    CHECK(field::extract_boundary(m) == std::vector<std::int32_t>{3 * 7 + 3});
  }
  SUBCASE("5x5 square perimeter") {
    BinaryMask m(9, 9);
    for (int y = 2; y <= 6; ++y)
      for (int x = 2; x <= 6; ++x) m(x, y) = 1;
    const auto b = field::extract_boundary(m);
    CHECK(b.size() == 16);
    for (auto i : b) {
      const int x = i % 9, y = i / 9;
      CHECK((x == 2 || x == 6 || y == 2 || y == 6));
    }
    CHECK(std::is_sorted(b.begin(), b.end()));
  }
  SUBCASE("foreground on the image border is boundary") {
    BinaryMask m(4, 4);
    for (int x = 0; x < 4; ++x) m(x, 0) = m(x, 1) = 1;
    const auto b = field::extract_boundary(m);
    CHECK(b.size() == 8);
  }
  SUBCASE("single-class masks") {
    try {
      field::extract_boundary(BinaryMask(5, 5, 0));
    } catch (const Error& e) {
      CHECK(e.code() == Errc::AllBackground);
    }
    try {
      field::extract_boundary(BinaryMask(5, 5, 1));
      FAIL("expected AllForeground");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::AllForeground);
    }
  }
  SUBCASE("non-binary values are rejected") {
    BinaryMask m(3, 3);
    m(1, 1) = 2;
    try {
      field::extract_boundary(m);
      FAIL("expected NonBinaryMask");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NonBinaryMask);
    }
  }
}

TEST_CASE("distance_transform examples") {
  BinaryMask m(11, 11);
  m(5, 5) = 1;
  const auto df = field::distance_transform(m);
  CHECK(df.d(5, 8) == 3.0);
  CHECK(df.s(5, 8) == -3.0);
  CHECK(df.d(5, 5) == 0.0);
  CHECK(df.s(5, 5) == 0.0);
  CHECK(df.nearest(0, 0) == 5 * 11 + 5);
  CHECK(df.d(0, 0) == doctest::Approx(std::sqrt(50.0)));

  const auto circle = field::distance_transform(circle_mask(30, 96, {48, 48}));
  for (auto b : circle.boundary) CHECK(circle.d[static_cast<std::size_t>(b)] == 0.0);
  CHECK(circle.s(48, 48) > 0.0);
  CHECK(circle.s(2, 2) < 0.0);
}

TEST_CASE("distance_transform matches the brute-force oracle exactly") {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> density(0.05, 0.95);
  int checked = 0;
  while (checked < 100) {
    const auto m = oracle::random_mask(16, 16, density(rng), rng);
    std::size_t fg = 0;
    for (auto v : m.data()) fg += v;
    if (fg == 0 || fg == m.size()) continue;
    const auto df = field::distance_transform(m, Exec::Serial);
    const auto ref = oracle::brute_edt(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      REQUIRE(df.d[i] == std::sqrt(static_cast<double>(ref.d2[i])));
      REQUIRE(df.nearest[i] == ref.nearest[i]);
      REQUIRE(std::abs(df.s[i]) == df.d[i]);
      REQUIRE((df.s[i] >= 0.0) == (m[i] == 1 || df.d[i] == 0.0));
    }
    ++checked;
  }
}

TEST_CASE("distance_transform is identical serially and in parallel") {
  std::mt19937_64 rng(5);
  const auto m = oracle::random_mask(61, 47, 0.3, rng);
  const auto a = field::distance_transform(m, Exec::Serial);
  const auto b = field::distance_transform(m, Exec::Parallel);
  CHECK(a.d == b.d);
  CHECK(a.s == b.s);
  CHECK(a.nearest == b.nearest);
}

TEST_CASE("rotation_angle") {
  CHECK(field::rotation_angle(0.0) == doctest::Approx(kPi / 2).epsilon(1e-15));
  for (double s : {20.0, 50.0, 1e6}) CHECK(field::rotation_angle(s) <= 1e-6 * kPi);
  for (double s : {-20.0, -50.0, -1e6}) CHECK(kPi - field::rotation_angle(s) <= 1e-6 * kPi);
  double prev = field::rotation_angle(-30.0);
  for (double s = -29.5; s <= 30.0; s += 0.5) {
    const double t = field::rotation_angle(s);
    CHECK(t < prev);
    CHECK(t > 0.0);
    CHECK(t < kPi);
    CHECK(t == doctest::Approx(kPi * (1.0 - 1.0 / (1.0 + std::exp(-s)))).epsilon(1e-12));
    prev = t;
  }
}

TEST_CASE("rotate_vector") {
  auto near = [](Vec2 a, Vec2 b) { return std::abs(a.x - b.x) < 1e-12 && std::abs(a.y - b.y) < 1e-12; };
  CHECK(near(field::rotate_vector({1, 0}, kPi / 2), {0, 1}));
  CHECK(near(field::rotate_vector({1, 0}, 0.0), {1, 0}));
  CHECK(near(field::rotate_vector({0.6, 0.8}, kPi), {-0.6, -0.8}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 100; ++i) {
    const Vec2 v{u(rng), u(rng)};
    CHECK(norm(field::rotate_vector(v, u(rng))) == doctest::Approx(norm(v)));
  }
}

TEST_CASE("attraction_direction on a circle") {
  const Vec2 c{100, 100};
  const auto df = field::distance_transform(circle_mask(40, 200, c));
  const auto out = field::attraction_direction(df, 160, 100);
  CHECK_FALSE(out.singular);
  CHECK(std::abs(out.u.x - 1.0) <= 0.05);
  CHECK(std::abs(out.u.y) <= 0.05);
  const auto in = field::attraction_direction(df, 110, 100);
  CHECK_FALSE(in.singular);
  CHECK(std::abs(in.u.x - 1.0) <= 0.05);
  CHECK(std::abs(in.u.y) <= 0.05);
  const auto centre = field::attraction_direction(df, 100, 100);
  CHECK(centre.singular);
  CHECK(centre.u == Vec2{0, 0});
}

TEST_CASE("attraction_direction at a tie between two boundary pixels is singular") {
  BinaryMask m(21, 21);
  m(5, 10) = 1;
  m(15, 10) = 1;
  const auto df = field::distance_transform(m);
  const auto tie = field::attraction_direction(df, 10, 10);
  CHECK(tie.singular);
  CHECK(tie.u == Vec2{0, 0});
  const auto off = field::attraction_direction(df, 12, 10);
  CHECK_FALSE(off.singular);
  CHECK(norm(off.u) == doctest::Approx(1.0));
}

TEST_CASE("build_dynamic on the r=50 circle") {
  const auto fb = field::build_dynamic(circle_mask(50));
  SUBCASE("examples") {
    const Vec2 on = fb.v(178, 128);
    CHECK(std::abs(on.x) <= 0.1);
    CHECK(std::abs(on.y - 1.0) <= 0.1);
    CHECK(fb.v(228, 128).x < 0.0);
    CHECK(fb.v(138, 128).x > 0.0);
  }
  SUBCASE("theta layer and unit norms") {
    for (std::size_t i = 0; i < fb.s.size(); ++i) {
      CHECK(fb.theta[i] == field::rotation_angle(fb.s[i]));
      if (fb.singular[i]) {
        CHECK(fb.v[i] == Vec2{0, 0});
      } else {
        REQUIRE(std::abs(norm(fb.v[i]) - 1.0) <= 1e-6);
      }
    }
  }
  SUBCASE("tangency and sign structure") {
    const auto df = field::distance_transform(circle_mask(50));
    double sum = 0.0, worst = 0.0;
    for (auto b : df.boundary) {
      const int x = b % 256, y = b / 256;
      const Vec2 n = (1.0 / std::hypot(x - 128.0, y - 128.0)) * Vec2{x - 128.0, y - 128.0};
      const double a = std::abs(dot(fb.v(x, y), n));
      sum += a;
      worst = std::max(worst, a);
    }
    const double mean = sum / static_cast<double>(df.boundary.size());
    MESSAGE("boundary mean |v.n| = " << mean << ", max = " << worst);
    CHECK(mean <= 0.1);
    CHECK(worst <= 0.35);
    for (int y = 0; y < 256; ++y) {
      for (int x = 0; x < 256; ++x) {
        if (x == 128 && y == 128) continue;
        const Vec2 n = (1.0 / std::hypot(x - 128.0, y - 128.0)) * Vec2{x - 128.0, y - 128.0};
        const double vn = dot(fb.v(x, y), n);
        if (fb.s(x, y) < -2.0) REQUIRE(vn < 0.0);
        if (fb.s(x, y) > 2.0 && !fb.singular(x, y)) REQUIRE(vn > 0.0);
      }
    }
  }
}

TEST_CASE("build_dynamic is identical serially and in parallel") {
  std::mt19937_64 rng(9);
  const auto m = oracle::random_mask(40, 33, 0.5, rng);
  const auto a = field::build_dynamic(m, Exec::Serial);
  const auto b = field::build_dynamic(m, Exec::Parallel);
  CHECK(a.s == b.s);
  CHECK(a.theta == b.theta);
  CHECK(a.v == b.v);
  CHECK(a.singular == b.singular);
}

TEST_CASE("sample_field") {
  FieldBundle fb{Grid<double>(3, 2), Grid<double>(3, 2), Grid<Vec2>(3, 2), Grid<std::uint8_t>(3, 2)};
  fb.v(0, 0) = {1, 0};
  fb.v(1, 0) = {0, 0};
  fb.v(2, 1) = {0.6, 0.8};
  CHECK(field::sample_field(fb, {0, 0}) == Vec2{1, 0});
  CHECK(field::sample_field(fb, {2, 1}) == Vec2{0.6, 0.8});
  const Vec2 mid = field::sample_field(fb, {0.5, 0});
  CHECK(mid.x == doctest::Approx(0.5));
  CHECK(mid.y == doctest::Approx(0.0));
  for (Vec2 p : {Vec2{-1, -1}, Vec2{2.0001, 0}, Vec2{0, 1.5}, Vec2{-1e-9, 0}}) {
    try {
      field::sample_field(fb, p);
      FAIL("expected OutOfBounds");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OutOfBounds);
    }
  }
}

TEST_CASE("RK4 integration converges to the circle boundary") {
  const Vec2 c{128, 128};
  const double r0 = 50.0;
  const auto fb = field::build_dynamic(circle_mask(r0));
  const auto df = field::distance_transform(circle_mask(r0));
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coord(20.0, 236.0);
  int seeds = 0;
  while (seeds < 10) {
    const Vec2 p0{coord(rng), coord(rng)};
    const double d0 = df.d(static_cast<int>(std::lround(p0.x)), static_cast<int>(std::lround(p0.y)));
    if (d0 < 5.0 || d0 > 40.0) continue;
    Vec2 p = p0;
    for (int i = 0; i < 4000; ++i) p = rk4(fb, p, 0.5);
    const double r = norm(p - c);
    CHECK_MESSAGE(std::abs(r - r0) <= 1.5, "seed (" << p0.x << ", " << p0.y << ") ended at radius " << r);
    ++seeds;
  }
}

TEST_CASE("field file round trip and errors") {
  const auto fb = field::build_dynamic(circle_mask(20, 64, {32, 32}));
  const auto path = temp_path("rt.vf");
  field::save_field(fb, path);
  const auto back = field::load_field(path);
  REQUIRE(back.width() == 64);
  for (std::size_t i = 0; i < fb.s.size(); ++i) {
    CHECK(back.s[i] == static_cast<double>(static_cast<float>(fb.s[i])));
    CHECK(back.theta[i] == static_cast<double>(static_cast<float>(fb.theta[i])));
    CHECK(back.v[i].x == static_cast<double>(static_cast<float>(fb.v[i].x)));
    CHECK(back.singular[i] == fb.singular[i]);
  }
  const auto size = std::filesystem::file_size(path);
  CHECK(size == std::string("DPMVF1 64 64\n").size() + 64 * 64 * 17);

  std::filesystem::resize_file(path, size - 5);
  try {
    field::load_field(path);
    FAIL("expected TruncatedFile");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TruncatedFile);
  }
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTAFIELD\n";
  }
  try {
    field::load_field(path);
    FAIL("expected BadMagic");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadMagic);
  }
  std::filesystem::remove(path);
}
