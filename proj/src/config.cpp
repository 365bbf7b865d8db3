#include "dpm/config.hpp"

#include <cmath>

#include "dpm/io.hpp"

namespace dpm::config {
namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::BadConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::BadConfig, what);
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return {{"patch_size", patch_size},   {"h", h},
          {"rho", rho},                 {"band_px", band_px},
          {"offsets_deg", offsets_deg}, {"arch", arch.to_json()},
          {"epochs", epochs},           {"batch", batch},
          {"lr", lr},                   {"beta1", beta1},
          {"beta2", beta2},             {"adam_eps", adam_eps},
          {"warmup", warmup},           {"eps", eps},
          {"k", k},                     {"max_steps", max_steps},
          {"n_points", n_points},       {"h_min", h_min},
          {"h_max", h_max},             {"renormalize", renormalize},
          {"spacing_mm", spacing_mm},   {"dataset_seed", dataset_seed},
          {"model_seed", model_seed},   {"train_seed", train_seed},
          {"rollout_seed", rollout_seed}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::BadConfig, "config must be a JSON object");
  RunConfig c;
  const auto known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(Errc::BadConfig, "unknown config key '" + key + "'");
  }
  take(j, "patch_size", c.patch_size);
  take(j, "h", c.h);
  take(j, "rho", c.rho);
  take(j, "band_px", c.band_px);
  take(j, "offsets_deg", c.offsets_deg);
  take(j, "epochs", c.epochs);
  take(j, "batch", c.batch);
  take(j, "lr", c.lr);
  take(j, "beta1", c.beta1);
  take(j, "beta2", c.beta2);
  take(j, "adam_eps", c.adam_eps);
  take(j, "warmup", c.warmup);
  take(j, "eps", c.eps);
  take(j, "k", c.k);
  take(j, "max_steps", c.max_steps);
  take(j, "n_points", c.n_points);
  take(j, "h_min", c.h_min);
  take(j, "h_max", c.h_max);
  take(j, "renormalize", c.renormalize);
  take(j, "spacing_mm", c.spacing_mm);
  take(j, "dataset_seed", c.dataset_seed);
  take(j, "model_seed", c.model_seed);
  take(j, "train_seed", c.train_seed);
  take(j, "rollout_seed", c.rollout_seed);
  if (j.contains("arch")) {
    c.arch = model::Architecture::from_json(j.at("arch"));
  } else {
    c.arch = model::Architecture::default_arch(c.patch_size);
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  require(patch_size >= 8 && patch_size % 2 == 0, "patch_size must be even and at least 8");
  require(h > 0.0, "h must be positive");
  require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
  require(band_px > 0.0, "band_px must be positive");
  for (double o : offsets_deg) require(std::isfinite(o) && o > -180.0 && o <= 180.0, "offsets_deg in (-180, 180]");
  require(arch.input_size == patch_size, "arch.input_size must equal patch_size");
  try {
    model::describe(arch);
  } catch (const Error& e) {
    throw Error(Errc::BadConfig, std::string("arch: ") + e.what());
  }
  require(epochs >= 0, "epochs must be non-negative");
  require(batch >= 1, "batch must be at least 1");
  require(lr > 0.0, "lr must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(warmup >= 2, "warmup must be at least 2");
  require(eps > 0.0, "eps must be positive");
  require(k >= 1, "k must be at least 1");
  require(max_steps >= 1, "max_steps must be at least 1");
  require(n_points >= 3, "n_points must be at least 3");
  require(h_min > 0.0 && h_min <= h && h <= h_max, "need 0 < h_min <= h <= h_max");
  require(spacing_mm > 0.0, "spacing_mm must be positive");
}

patches::DatasetConfig RunConfig::dataset() const {
  patches::DatasetConfig d;
  d.rho = rho;
  d.band_px = band_px;
  d.offsets.clear();
  for (double o : offsets_deg) d.offsets.push_back(o * kPi / 180.0);
  d.h = h;
  d.patch_size = patch_size;
  d.seed = dataset_seed;
  return d;
}

model::TrainConfig RunConfig::train() const {
  model::TrainConfig t;
  t.epochs = epochs;
  t.batch = batch;
  t.adam = {lr, beta1, beta2, adam_eps};
  t.seed = train_seed;
  return t;
}

agent::StepConfig RunConfig::step() const { return {h, h_min, h_max, renormalize, patch_size}; }

agent::StopConfig RunConfig::stop() const { return {warmup, eps, k, max_steps, n_points}; }

RunConfig load(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, "config '" + path + "': " + e.what());
  }
  return RunConfig::from_json(j);
}

void save(const RunConfig& cfg, const std::string& path) { io::write_text(cfg.to_json().dump(2) + "\n", path); }

RunConfig apply_overrides(const RunConfig& cfg, const std::vector<std::string>& assignments) {
  if (assignments.empty()) return cfg;
  auto j = cfg.to_json();
  const bool default_arch = cfg.arch == model::Architecture::default_arch(cfg.patch_size);
  bool arch_set = false;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(Errc::BadConfig, "override '" + a + "' is not key=value");
    const std::string key = a.substr(0, eq);
    const std::string text = a.substr(eq + 1);
    if (!j.contains(key)) throw Error(Errc::BadConfig, "unknown config key '" + key + "'");
    auto value = nlohmann::json::parse(text, nullptr, false);
    j[key] = value.is_discarded() ? nlohmann::json(text) : value;
    arch_set = arch_set || key == "arch";
  }
  if (default_arch && !arch_set) j.erase("arch");
  return RunConfig::from_json(j);
}

}  // namespace dpm::config
