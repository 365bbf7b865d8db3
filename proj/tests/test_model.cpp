#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dpm/model.hpp"
#include "dpm/synth.hpp"
#include "oracles.hpp"

using namespace dpm;
using namespace dpm::model;

namespace {

Architecture tiny_arch(int which) {
  Architecture a;
  switch (which) {
    case 0:
      a.input_size = 8;
      a.layers = {LayerSpec::conv(3, 3), LayerSpec::relu(), LayerSpec::conv(3, 4), LayerSpec::relu(),
                  LayerSpec::flatten(), LayerSpec::dense(2)};
      break;
    case 1:
      a.input_size = 10;
      a.layers = {LayerSpec::conv(3, 4), LayerSpec::relu(), LayerSpec::maxpool(), LayerSpec::conv(2, 3),
                  LayerSpec::flatten(), LayerSpec::dense(5), LayerSpec::relu(), LayerSpec::dense(2)};
      break;
    default:
      a.input_size = 11;
      a.layers = {LayerSpec::conv(3, 2, 2), LayerSpec::relu(), LayerSpec::conv(2, 3), LayerSpec::maxpool(),
                  LayerSpec::flatten(), LayerSpec::dense(4), LayerSpec::relu(), LayerSpec::dense(2)};
      break;
  }
  return a;
}

// Biases are zero after init; give them values so their gradients are exercised.
BasicPolicyModel<double> random_double_model(const Architecture& arch, std::uint64_t seed) {
  auto m = init_model<double>(arch, seed);
  std::mt19937_64 rng(seed + 100);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (const auto& t : describe(arch)) {
    if (t.shape.size() == 1) {
      for (std::size_t i = 0; i < t.count; ++i) m.params[t.offset + i] = u(rng);
    }
  }
  return m;
}

std::vector<double> random_patch(int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> out(static_cast<std::size_t>(p) * p);
  for (double& v : out) v = n(rng);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dpm_test_model_" + name)).string();
}

patches::MemorySource one_sample(int p, Vec2 target) {
  std::vector<patches::PatchSample> s(1);
  s[0].pixels.resize(static_cast<std::size_t>(p) * p);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : s[0].pixels) v = u(rng);
  s[0].target = target;
  return patches::MemorySource(std::move(s), p, norm(target));
}

}  // namespace

TEST_CASE("architecture description") {
  const auto arch = Architecture::default_arch();
  const auto tensors = describe(arch);
  std::size_t sum = 0;
  for (const auto& t : tensors) {
    CHECK(t.offset == sum);
    sum += t.count;
  }
  CHECK(sum == parameter_count(arch));
  // conv 3x3/8, 3x3/16, 3x3/32 on 64 -> 62 -> 31 -> 29 -> 14 -> 12 -> 6; 6*6*32 features.
  CHECK(parameter_count(arch) == (9 * 8 + 8) + (72 * 16 + 16) + (144 * 32 + 32) + (1152 * 128 + 128) + (128 * 2 + 2));
  CHECK(Architecture::from_json(arch.to_json()) == arch);

  Architecture wide = arch;
  wide.layers.back() = LayerSpec::dense(3);
  CHECK_THROWS_AS(describe(wide), Error);
  Architecture shrunk = arch;
  shrunk.input_size = 8;
  try {
    init_model<float>(shrunk, 1);
    FAIL("expected BadArchitecture");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadArchitecture);
  }
}

TEST_CASE("init_model") {
  const auto arch = Architecture::default_arch();
  const auto a = init_model<float>(arch, 42);
  const auto b = init_model<float>(arch, 42);
  const auto c = init_model<float>(arch, 43);
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);
  CHECK(a.params.size() == parameter_count(arch));
  CHECK(a.adam_step == 0);
  for (float v : a.adam_m) REQUIRE(v == 0.0f);
  for (const auto& t : describe(arch)) {
    if (t.shape.size() == 1) {
      for (std::size_t i = 0; i < t.count; ++i) REQUIRE(a.params[t.offset + i] == 0.0f);
    } else {
      const int fan_in = t.shape[1];
      const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
      for (std::size_t i = 0; i < t.count; ++i) REQUIRE(std::abs(a.params[t.offset + i]) <= bound);
    }
  }
}

TEST_CASE("forward") {
  SUBCASE("zero model") {
    auto m = init_model<float>(Architecture::default_arch(), 1);
    std::fill(m.params.begin(), m.params.end(), 0.0f);
    const std::vector<float> patch(64 * 64, 0.0f);
    CHECK(forward<float>(m, patch) == Vec2{0.0, 0.0});
  }
  SUBCASE("deterministic and finite") {
    const auto m = init_model<float>(Architecture::default_arch(), 2);
    std::vector<float> patch(64 * 64);
    for (std::size_t i = 0; i < patch.size(); ++i) patch[i] = std::sin(0.01f * static_cast<float>(i));
    const Vec2 a = forward<float>(m, patch);
    const Vec2 b = forward<float>(m, patch);
    CHECK(a == b);
    CHECK(std::isfinite(a.x));
    CHECK(std::isfinite(a.y));
  }
  SUBCASE("matches the loop oracle") {
    for (int which = 0; which < 3; ++which) {
      const auto arch = tiny_arch(which);
      const auto m = random_double_model(arch, 7 + which);
      for (std::uint64_t s = 0; s < 5; ++s) {
        const auto patch = random_patch(arch.input_size, s);
        const Vec2 got = forward<double>(m, patch);
        const Vec2 ref = oracle::naive_forward(arch, m.params, patch);
        CHECK(std::abs(got.x - ref.x) <= 1e-6);
        CHECK(std::abs(got.y - ref.y) <= 1e-6);
      }
    }
    const auto arch = Architecture::default_arch();
    const auto m = init_model<double>(arch, 3);
    const auto patch = random_patch(64, 9);
    const Vec2 got = forward<double>(m, patch);
    const Vec2 ref = oracle::naive_forward(arch, m.params, patch);
    CHECK(std::abs(got.x - ref.x) <= 1e-6);
    CHECK(std::abs(got.y - ref.y) <= 1e-6);
  }
  SUBCASE("batched evaluation equals single evaluation") {
    const auto arch = tiny_arch(1);
    const auto m = random_double_model(arch, 5);
    const std::size_t batch = 6;
    std::vector<double> inputs;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto p = random_patch(arch.input_size, 50 + b);
      inputs.insert(inputs.end(), p.begin(), p.end());
    }
    Evaluator<double> ev(arch);
    for (Exec e : {Exec::Serial, Exec::Parallel}) {
      ev.forward(m, inputs, batch, e);
      for (std::size_t b = 0; b < batch; ++b) {
        const std::span<const double> one(inputs.data() + b * 100, 100);
        const Vec2 single = forward<double>(m, one);
        CHECK(norm(ev.output(b) - single) <= 1e-12 * std::max(1.0, norm(single)));
      }
    }
  }
  SUBCASE("shape mismatch") {
    const auto m = init_model<float>(Architecture::default_arch(), 1);
    const std::vector<float> patch(63 * 63);
    try {
      forward<float>(m, patch);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
  }
}

TEST_CASE("loss_mse") {
  CHECK(loss_mse({1.5, -2.0}, {1.5, -2.0}) == 0.0);
  CHECK(loss_mse({1.0, 0.0}, {0.0, 0.0}) == 0.5);
  CHECK(loss_mse({3.0, 4.0}, {0.0, 0.0}) == 12.5);
}

TEST_CASE("backward against central finite differences") {
  for (int which = 0; which < 3; ++which) {
    const auto arch = tiny_arch(which);
    auto m = random_double_model(arch, 11 + which);
    const auto patch = random_patch(arch.input_size, 20 + which);
    const Vec2 target{0.7, -1.3};
    const auto grads = backward<double>(m, patch, target);
    REQUIRE(grads.size() == m.params.size());

    const double step = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      const double keep = m.params[i];
      m.params[i] = keep + step;
      const double up = loss_mse(forward<double>(m, patch), target);
      m.params[i] = keep - step;
      const double down = loss_mse(forward<double>(m, patch), target);
      m.params[i] = keep;
      const double fd = (up - down) / (2.0 * step);
      const double rel = std::abs(grads[i] - fd) / std::max({std::abs(grads[i]), std::abs(fd), 1e-7});
      worst = std::max(worst, rel);
    }
    INFO("architecture " << which);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("backward properties") {
  const auto arch = tiny_arch(1);
  auto m = random_double_model(arch, 3);
  const auto patch = random_patch(arch.input_size, 4);
  const auto a = backward<double>(m, patch, {1.0, 2.0});
  const auto b = backward<double>(m, patch, {1.0, 2.0});
  CHECK(a == b);

  const auto tensors = describe(arch);
  const auto& last_w = tensors[tensors.size() - 2];
  for (std::size_t i = 0; i < last_w.count; ++i) m.params[last_w.offset + i] = 0.0;
  const auto g = backward<double>(m, patch, {1.0, 2.0});
  for (std::size_t i = 0; i < last_w.offset; ++i) REQUIRE(g[i] == 0.0);

  SUBCASE("batched gradient is the mean of per-sample gradients") {
    const auto fresh = random_double_model(arch, 8);
    std::vector<double> inputs;
    std::vector<Vec2> targets;
    std::vector<double> mean(fresh.params.size(), 0.0);
    for (int s = 0; s < 4; ++s) {
      const auto p = random_patch(arch.input_size, 70 + s);
      inputs.insert(inputs.end(), p.begin(), p.end());
      targets.push_back({0.1 * s, -0.5});
      const auto gs = backward<double>(fresh, p, targets.back());
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += gs[i] / 4.0;
    }
    Evaluator<double> ev(arch);
    std::vector<double> batched(fresh.params.size());
    ev.forward(fresh, inputs, 4);
    ev.backward(fresh, targets, batched);
    for (std::size_t i = 0; i < mean.size(); ++i) REQUIRE(batched[i] == doctest::Approx(mean[i]).epsilon(1e-10));
  }
}

TEST_CASE("adam_step") {
  const auto arch = tiny_arch(0);
  SUBCASE("zero gradients") {
    auto m = random_double_model(arch, 1);
    const auto before = m.params;
    adam_step<double>(m, std::vector<double>(m.params.size(), 0.0), {});
    CHECK(m.params == before);
    CHECK(m.adam_step == 1);
  }
  SUBCASE("first step moves each parameter by lr") {
    auto m = random_double_model(arch, 1);
    const auto before = m.params;
    const AdamConfig cfg{1e-3, 0.9, 0.999, 1e-8};
    std::vector<double> g(m.params.size(), 0.37);
    for (std::size_t i = 0; i < g.size(); i += 2) g[i] = -2.5;
    adam_step<double>(m, g, cfg);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double delta = m.params[i] - before[i];
      REQUIRE(std::abs(std::abs(delta) - cfg.lr) <= 1e-6);
      REQUIRE((delta < 0) == (g[i] > 0));
    }
  }
  SUBCASE("deterministic") {
    auto a = random_double_model(arch, 2);
    auto b = random_double_model(arch, 2);
    const auto g = backward<double>(a, random_patch(arch.input_size, 1), {1.0, 0.0});
    for (int i = 0; i < 3; ++i) {
      adam_step<double>(a, g, {});
      adam_step<double>(b, g, {});
    }
    CHECK(a.params == b.params);
    CHECK(a.adam_v == b.adam_v);
  }
}

TEST_CASE("train") {
  SUBCASE("overfits a single sample") {
    const auto data = one_sample(64, {2.0, 0.0});
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch = 1;
    cfg.adam.lr = 1e-2;
    const auto r = train(data, init_model<float>(Architecture::default_arch(), 3), cfg);
    CHECK(r.loss_history.size() == 200);
    std::vector<float> patch(64 * 64);
    Vec2 target;
    data.fetch(0, patch, target);
    patches::standardize(patch);
    CHECK(loss_mse(forward<float>(r.model, patch), target) < 1e-3);
  }
  SUBCASE("zero epochs") {
    const auto data = one_sample(64, {2.0, 0.0});
    const auto init = init_model<float>(Architecture::default_arch(), 3);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train(data, init, cfg);
    CHECK(r.loss_history.empty());
    CHECK(r.model.params == init.params);
  }
  SUBCASE("empty dataset") {
    const patches::MemorySource empty({}, 64, 2.0);
    try {
      train(empty, init_model<float>(Architecture::default_arch(), 3), {});
      FAIL("expected EmptyDataset");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptyDataset);
    }
  }
}

TEST_CASE("training on synthetic blobs descends and is reproducible") {
  synth::ShapeSpec spec;
  spec.seed = 12;
  const auto samples = synth::gen_dataset(2, spec);
  std::vector<patches::ImageMaskPair> pairs;
  for (const auto& s : samples) pairs.emplace_back(s.image, s.mask);
  patches::DatasetConfig dcfg;
  dcfg.rho = 0.02;
  dcfg.seed = 1;
  const patches::LazySource data(pairs, patches::plan_dataset(pairs, dcfg), 64, dcfg.h);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 5;
  const auto init = init_model<float>(Architecture::default_arch(), 6);
  const auto a = train(data, init, cfg);
  MESSAGE("samples " << data.size() << ", epoch 1 loss " << a.loss_history.front() << ", epoch 10 loss "
                     << a.loss_history.back());
  CHECK(a.loss_history.back() < 0.5 * a.loss_history.front());

  TrainConfig short_cfg = cfg;
  short_cfg.epochs = 2;
  const auto b = train(data, init, short_cfg);
  const auto c = train(data, init, short_cfg);
  CHECK(b.loss_history == c.loss_history);
  CHECK(b.model.params == c.model.params);
  CHECK(b.loss_history[0] == a.loss_history[0]);
}

TEST_CASE("checkpoints") {
  auto m = init_model<float>(Architecture::default_arch(), 8);
  const auto data = one_sample(64, {0.0, 2.0});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 1;
  m = train(data, m, cfg).model;

  const auto path = temp_path("a.ckpt");
  save_checkpoint(m, path);
  const auto back = load_checkpoint(path);
  CHECK(back.params == m.params);
  CHECK(back.adam_m == m.adam_m);
  CHECK(back.adam_v == m.adam_v);
  CHECK(back.adam_step == m.adam_step);
  CHECK(back.arch == m.arch);
  std::vector<float> patch(64 * 64, 0.0f);
  patch[100] = 1.0f;
  CHECK(forward<float>(back, patch) == forward<float>(m, patch));

  const auto bytes = std::filesystem::file_size(path);
  SUBCASE("truncated") {
    std::filesystem::resize_file(path, bytes - 7);
    try {
      load_checkpoint(path);
      FAIL("expected TruncatedFile");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::TruncatedFile);
    }
  }
  SUBCASE("trailing bytes") {
    std::ofstream(path, std::ios::binary | std::ios::app) << "xyz";
    try {
      load_checkpoint(path);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
  }
  SUBCASE("header disagrees with blob") {
    std::ifstream in(path, std::ios::binary);
    std::string magic, header;
    std::getline(in, magic);
    std::getline(in, header);
    auto j = nlohmann::json::parse(header);
    j["blob_bytes"] = j["blob_bytes"].get<std::size_t>() - 4;
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream(path, std::ios::binary) << magic << "\n" << j.dump() << "\n" << rest;
    try {
      load_checkpoint(path);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
  }
  SUBCASE("bad magic") {
    std::ofstream(path, std::ios::binary) << "DPMCKPT0\n{}\n";
    try {
      load_checkpoint(path);
      FAIL("expected BadMagic");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::BadMagic);
    }
  }
  std::filesystem::remove(path);
}
