#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpm/agent.hpp"
#include "dpm/model.hpp"
#include "dpm/patches.hpp"

namespace dpm::config {

/// Every stage's settings in one flat JSON record. Angles are stored in degrees.
struct RunConfig {
  int patch_size = 64;
  double h = 2.0;
  double rho = 0.05;
  double band_px = 32.0;
  std::vector<double> offsets_deg = {45.0, -45.0};
  model::Architecture arch = model::Architecture::default_arch();
  int epochs = 10;
  int batch = 64;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t warmup = 50;
  double eps = 2.0;
  std::size_t k = 2;
  std::int64_t max_steps = 4000;
  std::size_t n_points = 200;
  double h_min = 0.5;
  double h_max = 4.0;
  bool renormalize = true;
  double spacing_mm = 1.0;
  std::uint64_t dataset_seed = 0;
  std::uint64_t model_seed = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t rollout_seed = 0;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys and out-of-domain values
  /// throw BadConfig.
  static RunConfig from_json(const nlohmann::json& j);

  /// Throws BadConfig naming the first violated field.
  void validate() const;

  patches::DatasetConfig dataset() const;
  model::TrainConfig train() const;
  agent::StepConfig step() const;
  agent::StopConfig stop() const;
};

RunConfig load(const std::string& path);
void save(const RunConfig& cfg, const std::string& path);

/// Applies "key=value" overrides; the value is parsed as JSON, falling back to
/// a plain string.
RunConfig apply_overrides(const RunConfig& cfg, const std::vector<std::string>& assignments);

}  // namespace dpm::config
