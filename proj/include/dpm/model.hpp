#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpm/common.hpp"
#include "dpm/patches.hpp"

// Patch -> displacement convolutional regressor with hand-written gradients.
namespace dpm::model {

enum class LayerKind { Conv, ReLU, MaxPool, Flatten, Dense };

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int kernel = 0;    // conv
  int stride = 1;    // conv
  int channels = 0;  // conv output channels
  int units = 0;     // dense

  static LayerSpec conv(int kernel, int channels, int stride = 1) {
    return {LayerKind::Conv, kernel, stride, channels, 0};
  }
  static LayerSpec relu() { return {LayerKind::ReLU}; }
  static LayerSpec maxpool() { return {LayerKind::MaxPool}; }
  static LayerSpec flatten() { return {LayerKind::Flatten}; }
  static LayerSpec dense(int units) { return {LayerKind::Dense, 0, 1, 0, units}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Ordered layer list applied to a single-channel input_size x input_size
/// patch. Convolutions are unpadded; max-pooling is 2x2 with stride 2.
struct Architecture {
  int input_size = 64;
  std::vector<LayerSpec> layers;

  /// conv3x3/8 relu pool, conv3x3/16 relu pool, conv3x3/32 relu pool,
  /// flatten, dense128 relu, dense2.
  static Architecture default_arch(int input_size = 64);

  nlohmann::json to_json() const;
  static Architecture from_json(const nlohmann::json& j);

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;  // in elements, within the parameter vector
  std::size_t count = 0;
};

/// Parameter tensors implied by the architecture. Throws BadArchitecture when
/// layer shapes do not compose or the final layer is not dense with 2 units.
std::vector<TensorInfo> describe(const Architecture& arch);
std::size_t parameter_count(const Architecture& arch);

template <typename T>
struct BasicPolicyModel {
  Architecture arch;
  std::uint64_t seed = 0;
  std::vector<T> params;
  std::vector<T> adam_m;
  std::vector<T> adam_v;
  std::int64_t adam_step = 0;
};

using PolicyModel = BasicPolicyModel<float>;

/// He-uniform weights, zero biases, zero Adam state.
template <typename T>
BasicPolicyModel<T> init_model(const Architecture& arch, std::uint64_t seed);

/// Reusable buffers for batched forward/backward passes.
template <typename T>
class Evaluator {
 public:
  explicit Evaluator(const Architecture& arch);
  ~Evaluator();
  Evaluator(Evaluator&&) noexcept;
  Evaluator& operator=(Evaluator&&) noexcept;

  /// inputs: batch * P * P values, sample-major, each patch row-major.
  void forward(const BasicPolicyModel<T>& model, std::span<const T> inputs, std::size_t batch,
               Exec exec = Exec::Parallel);
  Vec2 output(std::size_t sample) const;

  /// Gradient of the batch-mean loss_mse with respect to every parameter,
  /// for the batch passed to the last forward(). Returns the mean loss.
  double backward(const BasicPolicyModel<T>& model, std::span<const Vec2> targets,
                  std::span<T> grads, Exec exec = Exec::Parallel);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Throws ShapeMismatch when patch.size() != P*P.
template <typename T>
Vec2 forward(const BasicPolicyModel<T>& model, std::span<const T> patch);

/// ((du - tu)^2 + (dv - tv)^2) / 2
inline double loss_mse(Vec2 pred, Vec2 target) {
  const Vec2 d = pred - target;
  return 0.5 * (d.x * d.x + d.y * d.y);
}

template <typename T>
std::vector<T> backward(const BasicPolicyModel<T>& model, std::span<const T> patch, Vec2 target);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
void adam_step(BasicPolicyModel<T>& model, std::span<const T> grads, const AdamConfig& cfg);

struct TrainConfig {
  int epochs = 10;
  int batch = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
  PolicyModel model;
  std::vector<double> loss_history;  // per-epoch mean loss
};

/// Epoch-shuffled mini-batch Adam on standardized patches.
/// Throws EmptyDataset.
TrainResult train(const patches::SampleSource& data, PolicyModel initial, const TrainConfig& cfg);

/// "DPMCKPT1\n", one-line JSON header, little-endian float32 blob holding the
/// parameters followed by the Adam first and second moments.
void save_checkpoint(const PolicyModel& model, const std::string& path);
PolicyModel load_checkpoint(const std::string& path);

}  // namespace dpm::model
