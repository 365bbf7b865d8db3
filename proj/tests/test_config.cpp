#include <doctest.h>

#include <filesystem>

#include "dpm/config.hpp"

using namespace dpm;
using namespace dpm::config;

namespace {

Errc code_of(const nlohmann::json& j) {
  try {
    RunConfig::from_json(j);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  const auto d = c.dataset();
  REQUIRE(d.offsets.size() == 2);
  CHECK(d.offsets[0] == doctest::Approx(kPi / 4));
  CHECK(d.offsets[1] == doctest::Approx(-kPi / 4));
  CHECK(d.patch_size == 64);
  CHECK(c.train().adam.lr == 1e-3);
  CHECK(c.step().h == 2.0);
  CHECK(c.stop().n_points == 200);
  CHECK(c.stop().warmup == 50);
}

TEST_CASE("json round trip") {
  RunConfig c;
  c.rho = 0.1;
  c.epochs = 3;
  c.train_seed = 1ULL << 60;
  c.offsets_deg = {30.0};
  const auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  const auto path = (std::filesystem::temp_directory_path() / "dpm_test_config.json").string();
  save(c, path);
  CHECK(load(path).to_json() == c.to_json());
  std::filesystem::remove(path);
}

TEST_CASE("partial json keeps defaults") {
  const auto c = RunConfig::from_json({{"epochs", 2}, {"patch_size", 32}});
  CHECK(c.epochs == 2);
  CHECK(c.h == 2.0);
  CHECK(c.arch.input_size == 32);
}

TEST_CASE("rejects bad values") {
  CHECK(code_of({{"bogus", 1}}) == Errc::BadConfig);
  CHECK(code_of({{"h", "two"}}) == Errc::BadConfig);
  CHECK(code_of({{"rho", 0.0}}) == Errc::BadConfig);
  CHECK(code_of({{"epochs", -1}}) == Errc::BadConfig);
  CHECK(code_of({{"patch_size", 63}}) == Errc::BadConfig);
  CHECK(code_of({{"h_min", 3.0}}) == Errc::BadConfig);
  CHECK(code_of({{"offsets_deg", {200.0}}}) == Errc::BadConfig);
  CHECK(code_of({{"warmup", 1}}) == Errc::BadConfig);
  CHECK(code_of(nlohmann::json::array()) == Errc::BadConfig);
  CHECK_NOTHROW(RunConfig::from_json({{"epochs", 0}}));
}

TEST_CASE("overrides") {
  const RunConfig c;
  const auto o = apply_overrides(c, {"epochs=3", "renormalize=false", "offsets_deg=[10,-10]", "patch_size=32"});
  CHECK(o.epochs == 3);
  CHECK_FALSE(o.renormalize);
  CHECK(o.offsets_deg == std::vector<double>{10.0, -10.0});
  CHECK(o.arch.input_size == 32);
  CHECK_THROWS_AS(apply_overrides(c, {"nokey=1"}), Error);
  CHECK_THROWS_AS(apply_overrides(c, {"epochs"}), Error);
  CHECK_THROWS_AS(apply_overrides(c, {"epochs=abc"}), Error);
}
