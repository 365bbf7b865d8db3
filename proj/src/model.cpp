#define EIGEN_DONT_PARALLELIZE
#include "dpm/model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Core>

#include "dpm/binary.hpp"

namespace dpm::model {
namespace {

struct Step {
  LayerKind kind;
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  bool flat_out;
  int kernel = 0;
  int stride = 1;
  int fan_in = 0;                 // weight columns
  std::size_t w_off = 0, b_off = 0;
};

std::string layer_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

[[noreturn]] void bad_arch(std::size_t layer, const std::string& why) {
  throw Error(Errc::BadArchitecture, "layer " + std::to_string(layer) + ": " + why);
}

std::vector<Step> compile(const Architecture& arch) {
  if (arch.input_size <= 0) throw Error(Errc::BadArchitecture, "input size must be positive");
  if (arch.layers.empty()) throw Error(Errc::BadArchitecture, "empty layer list");
  std::vector<Step> plan;
  int c = 1, h = arch.input_size, w = arch.input_size;
  bool flat = false;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& spec = arch.layers[i];
    Step s{spec.kind, c, h, w, c, h, w, flat};
    switch (spec.kind) {
      case LayerKind::Conv:
        if (flat) bad_arch(i, "convolution after flatten");
        if (spec.kernel <= 0 || spec.stride <= 0 || spec.channels <= 0) bad_arch(i, "bad conv parameters");
        if (spec.kernel > h || spec.kernel > w) bad_arch(i, "kernel larger than input");
        s.kernel = spec.kernel;
        s.stride = spec.stride;
        s.out_c = spec.channels;
        s.out_h = (h - spec.kernel) / spec.stride + 1;
        s.out_w = (w - spec.kernel) / spec.stride + 1;
        s.fan_in = spec.kernel * spec.kernel * c;
        s.w_off = offset;
        offset += static_cast<std::size_t>(s.fan_in) * s.out_c;
        s.b_off = offset;
        offset += static_cast<std::size_t>(s.out_c);
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::MaxPool:
        if (flat || h < 2 || w < 2) bad_arch(i, "max-pool needs a spatial input of at least 2x2");
        s.out_h = h / 2;
        s.out_w = w / 2;
        break;
      case LayerKind::Flatten:
        s.out_c = c * h * w;
        s.out_h = s.out_w = 1;
        s.flat_out = true;
        break;
      case LayerKind::Dense:
        if (!flat) bad_arch(i, "dense layer needs a flattened input");
        if (spec.units <= 0) bad_arch(i, "dense layer needs units > 0");
        s.out_c = spec.units;
        s.fan_in = c;
        s.w_off = offset;
        offset += static_cast<std::size_t>(s.fan_in) * s.out_c;
        s.b_off = offset;
        offset += static_cast<std::size_t>(s.out_c);
        break;
    }
    c = s.out_c;
    h = s.out_h;
    w = s.out_w;
    flat = s.flat_out;
    plan.push_back(s);
  }
  if (plan.back().kind != LayerKind::Dense || plan.back().out_c != 2) {
    throw Error(Errc::BadArchitecture, "final layer must be dense with 2 units");
  }
  return plan;
}

}  // namespace

Architecture Architecture::default_arch(int input_size) {
  Architecture a;
  a.input_size = input_size;
  a.layers = {LayerSpec::conv(3, 8),  LayerSpec::relu(), LayerSpec::maxpool(),
              LayerSpec::conv(3, 16), LayerSpec::relu(), LayerSpec::maxpool(),
              LayerSpec::conv(3, 32), LayerSpec::relu(), LayerSpec::maxpool(),
              LayerSpec::flatten(),   LayerSpec::dense(128), LayerSpec::relu(),
              LayerSpec::dense(2)};
  return a;
}

nlohmann::json Architecture::to_json() const {
  nlohmann::json layers_json = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json j{{"type", layer_name(l.kind)}};
    if (l.kind == LayerKind::Conv) {
      j["kernel"] = l.kernel;
      j["stride"] = l.stride;
      j["channels"] = l.channels;
    } else if (l.kind == LayerKind::Dense) {
      j["units"] = l.units;
    }
    layers_json.push_back(j);
  }
  return {{"input", input_size}, {"layers", layers_json}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
  try {
    Architecture a;
    a.input_size = j.at("input").get<int>();
    for (const auto& lj : j.at("layers")) {
      const auto type = lj.at("type").get<std::string>();
      if (type == "conv") {
        a.layers.push_back(LayerSpec::conv(lj.at("kernel").get<int>(), lj.at("channels").get<int>(),
                                           lj.value("stride", 1)));
      } else if (type == "relu") {
        a.layers.push_back(LayerSpec::relu());
      } else if (type == "maxpool") {
        a.layers.push_back(LayerSpec::maxpool());
      } else if (type == "flatten") {
        a.layers.push_back(LayerSpec::flatten());
      } else if (type == "dense") {
        a.layers.push_back(LayerSpec::dense(lj.at("units").get<int>()));
      } else {
        throw Error(Errc::BadArchitecture, "unknown layer type '" + type + "'");
      }
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadArchitecture, e.what());
  }
}

std::vector<TensorInfo> describe(const Architecture& arch) {
  std::vector<TensorInfo> out;
  const auto plan = compile(arch);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& s = plan[i];
    const auto prefix = "layer" + std::to_string(i) + "." + layer_name(s.kind);
    if (s.kind == LayerKind::Conv) {
      // Storage is column-major (out_c x k*k*in_c), i.e. [ky][kx][in_c][out_c].
      out.push_back({prefix + ".weight", {s.kernel, s.kernel, s.in_c, s.out_c}, s.w_off,
                     static_cast<std::size_t>(s.fan_in) * s.out_c});
      out.push_back({prefix + ".bias", {s.out_c}, s.b_off, static_cast<std::size_t>(s.out_c)});
    } else if (s.kind == LayerKind::Dense) {
      out.push_back({prefix + ".weight", {s.fan_in, s.out_c}, s.w_off,
                     static_cast<std::size_t>(s.fan_in) * s.out_c});
      out.push_back({prefix + ".bias", {s.out_c}, s.b_off, static_cast<std::size_t>(s.out_c)});
    }
  }
  return out;
}

std::size_t parameter_count(const Architecture& arch) {
  std::size_t n = 0;
  for (const auto& t : describe(arch)) n += t.count;
  return n;
}

template <typename T>
BasicPolicyModel<T> init_model(const Architecture& arch, std::uint64_t seed) {
  const auto plan = compile(arch);
  BasicPolicyModel<T> m;
  m.arch = arch;
  m.seed = seed;
  m.params.assign(parameter_count(arch), T(0));
  m.adam_m.assign(m.params.size(), T(0));
  m.adam_v.assign(m.params.size(), T(0));
  std::mt19937_64 rng(seed);
  for (const auto& s : plan) {
    if (s.kind != LayerKind::Conv && s.kind != LayerKind::Dense) continue;
    const double limit = std::sqrt(6.0 / s.fan_in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t count = static_cast<std::size_t>(s.fan_in) * s.out_c;
    for (std::size_t k = 0; k < count; ++k) m.params[s.w_off + k] = static_cast<T>(dist(rng));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Evaluator
//
// Activations are (channels x batch*H*W) column-major matrices, so every
// spatial position holds its channels contiguously and flattening is a
// reshape of the same storage.

template <typename T>
struct Evaluator<T>::Impl {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using MapC = Eigen::Map<const Mat>;

  std::vector<Step> plan;
  int input_size;
  std::size_t batch = 0;
  std::vector<Mat> acts;  // acts[0] = input, acts[i + 1] = output of layer i
  std::vector<Mat> cols;  // im2col buffers per conv layer
  std::vector<std::vector<std::int32_t>> argmax;  // per max-pool layer
  std::vector<Mat> dacts;  // dacts[i] = gradient with respect to acts[i]
  Mat dcol;
  // Aligned copies of parameters and gradients. Eigen picks kernels by
  // pointer alignment, so working on maps into std::vector storage would make
  // results depend on where the allocator placed the buffer.
  std::vector<Mat> weights;
  Mat dweight;
  Eigen::Matrix<T, Eigen::Dynamic, 1> dbias;
  std::size_t n_params;

  explicit Impl(const Architecture& arch) : plan(compile(arch)), input_size(arch.input_size), n_params(parameter_count(arch)) {
    acts.resize(plan.size() + 1);
    dacts.resize(plan.size() + 1);
    cols.resize(plan.size());
    argmax.resize(plan.size());
    weights.resize(plan.size());
  }

  static std::size_t positions(int h, int w) { return static_cast<std::size_t>(h) * w; }

  void im2col(const Step& s, const Mat& in, Mat& col, Exec exec) {
    const std::size_t out_pos = positions(s.out_h, s.out_w);
    col.resize(s.fan_in, static_cast<Eigen::Index>(batch * out_pos));
    for_each_index(exec, static_cast<std::int64_t>(batch), [&](std::int64_t b) {
      for (int oy = 0; oy < s.out_h; ++oy) {
        for (int ox = 0; ox < s.out_w; ++ox) {
          const auto n = static_cast<Eigen::Index>(static_cast<std::size_t>(b) * out_pos +
                                                   static_cast<std::size_t>(oy) * s.out_w + ox);
          T* dst = col.col(n).data();
          // One kernel row spans kernel * in_c contiguous values.
          const int row_len = s.kernel * s.in_c;
          for (int ky = 0; ky < s.kernel; ++ky) {
            const auto src = static_cast<Eigen::Index>(
                static_cast<std::size_t>(b) * positions(s.in_h, s.in_w) +
                static_cast<std::size_t>(oy * s.stride + ky) * s.in_w + ox * s.stride);
            const T* from = in.col(src).data();
            T* to = dst + ky * row_len;
            for (int c = 0; c < row_len; ++c) to[c] = from[c];
          }
        }
      }
    });
  }

  void col2im(const Step& s, const Mat& dc, Mat& din, Exec exec) {
    const std::size_t out_pos = positions(s.out_h, s.out_w);
    din.setZero(s.in_c, static_cast<Eigen::Index>(batch * positions(s.in_h, s.in_w)));
    for_each_index(exec, static_cast<std::int64_t>(batch), [&](std::int64_t b) {
      for (int oy = 0; oy < s.out_h; ++oy) {
        for (int ox = 0; ox < s.out_w; ++ox) {
          const auto n = static_cast<Eigen::Index>(static_cast<std::size_t>(b) * out_pos +
                                                   static_cast<std::size_t>(oy) * s.out_w + ox);
          const T* src = dc.col(n).data();
          const int row_len = s.kernel * s.in_c;
          for (int ky = 0; ky < s.kernel; ++ky) {
            const auto dst_col = static_cast<Eigen::Index>(
                static_cast<std::size_t>(b) * positions(s.in_h, s.in_w) +
                static_cast<std::size_t>(oy * s.stride + ky) * s.in_w + ox * s.stride);
            T* dst = din.col(dst_col).data();
            const T* part = src + ky * row_len;
            for (int c = 0; c < row_len; ++c) dst[c] += part[c];
          }
        }
      }
    });
  }

  void forward(const BasicPolicyModel<T>& model, std::span<const T> inputs, std::size_t n, Exec exec) {
    const std::size_t pp = positions(input_size, input_size);
    if (n == 0 || inputs.size() != n * pp) {
      throw Error(Errc::ShapeMismatch, "input size does not match batch * P * P");
    }
    if (model.params.size() != n_params || model.arch.input_size != input_size) {
      throw Error(Errc::ShapeMismatch, "parameter vector does not match architecture");
    }
    batch = n;
    acts[0] = MapC(inputs.data(), 1, static_cast<Eigen::Index>(n * pp));
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const Step& s = plan[i];
      const Mat& in = acts[i];
      Mat& out = acts[i + 1];
      switch (s.kind) {
        case LayerKind::Conv: {
          im2col(s, in, cols[i], exec);
          Mat& weight = weights[i];
          weight = MapC(model.params.data() + s.w_off, s.out_c, s.fan_in);
          Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(model.params.data() + s.b_off, s.out_c);
          out.noalias() = weight * cols[i];
          out.colwise() += bias;
          break;
        }
        case LayerKind::ReLU:
          out = in.cwiseMax(T(0));
          break;
        case LayerKind::MaxPool: {
          const std::size_t in_pos = positions(s.in_h, s.in_w);
          const std::size_t out_pos = positions(s.out_h, s.out_w);
          out.resize(s.out_c, static_cast<Eigen::Index>(n * out_pos));
          auto& idx = argmax[i];
          idx.resize(static_cast<std::size_t>(out.size()));
          for_each_index(exec, static_cast<std::int64_t>(n), [&](std::int64_t b) {
            for (int oy = 0; oy < s.out_h; ++oy) {
              for (int ox = 0; ox < s.out_w; ++ox) {
                const auto on = static_cast<Eigen::Index>(static_cast<std::size_t>(b) * out_pos +
                                                          static_cast<std::size_t>(oy) * s.out_w + ox);
                const auto base = static_cast<std::int32_t>(static_cast<std::size_t>(b) * in_pos +
                                                            static_cast<std::size_t>(2 * oy) * s.in_w + 2 * ox);
                const std::int32_t src[4] = {base, base + 1, base + s.in_w, base + s.in_w + 1};
                T* dst = out.col(on).data();
                std::int32_t* arg = idx.data() + static_cast<std::size_t>(on) * s.out_c;
                const T* first = in.col(src[0]).data();
                for (int c = 0; c < s.out_c; ++c) {
                  dst[c] = first[c];
                  arg[c] = src[0];
                }
                // Strict comparison keeps the first maximum in window order.
                for (int k = 1; k < 4; ++k) {
                  const T* cand = in.col(src[k]).data();
                  for (int c = 0; c < s.out_c; ++c) {
                    if (cand[c] > dst[c]) {
                      dst[c] = cand[c];
                      arg[c] = src[k];
                    }
                  }
                }
              }
            }
          });
          break;
        }
        case LayerKind::Flatten:
          out = MapC(in.data(), s.out_c, static_cast<Eigen::Index>(n));
          break;
        case LayerKind::Dense: {
          Mat& weight = weights[i];
          weight = MapC(model.params.data() + s.w_off, s.out_c, s.fan_in);
          Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(model.params.data() + s.b_off, s.out_c);
          out.noalias() = weight * in;
          out.colwise() += bias;
          break;
        }
      }
    }
  }

  double backward(const BasicPolicyModel<T>& model, std::span<const Vec2> targets, std::span<T> grads,
                  Exec exec) {
    if (batch == 0) throw Error(Errc::ShapeMismatch, "backward called before forward");
    if (targets.size() != batch) throw Error(Errc::ShapeMismatch, "target count does not match batch");
    if (grads.size() != model.params.size()) throw Error(Errc::ShapeMismatch, "gradient buffer size");

    const Mat& pred = acts.back();
    Mat& dpred = dacts.back();
    dpred.resize(2, static_cast<Eigen::Index>(batch));
    double loss = 0.0;
    const T inv_batch = T(1) / static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto bi = static_cast<Eigen::Index>(b);
      const Vec2 p{static_cast<double>(pred(0, bi)), static_cast<double>(pred(1, bi))};
      loss += loss_mse(p, targets[b]);
      dpred(0, bi) = (pred(0, bi) - static_cast<T>(targets[b].x)) * inv_batch;
      dpred(1, bi) = (pred(1, bi) - static_cast<T>(targets[b].y)) * inv_batch;
    }

    // dacts[i] holds the loss gradient with respect to acts[i]; buffers are
    // reused across batches of equal size.
    for (std::size_t li = plan.size(); li-- > 0;) {
      const Step& s = plan[li];
      const Mat& in = acts[li];
      const Mat& grad_out = dacts[li + 1];
      Mat& grad_in = dacts[li];
      const bool need_input_grad = li > 0;
      switch (s.kind) {
        case LayerKind::Conv:
        case LayerKind::Dense: {
          const Mat& x = s.kind == LayerKind::Conv ? cols[li] : in;
          dweight.noalias() = grad_out * x.transpose();
          dbias = grad_out.rowwise().sum();
          std::copy_n(dweight.data(), dweight.size(), grads.data() + s.w_off);
          std::copy_n(dbias.data(), dbias.size(), grads.data() + s.b_off);
          if (need_input_grad) {
            const Mat& weight = weights[li];
            if (s.kind == LayerKind::Conv) {
              dcol.noalias() = weight.transpose() * grad_out;
              col2im(s, dcol, grad_in, exec);
            } else {
              grad_in.noalias() = weight.transpose() * grad_out;
            }
          }
          break;
        }
        case LayerKind::ReLU:
          if (need_input_grad) grad_in = (acts[li + 1].array() > T(0)).select(grad_out, T(0));
          break;
        case LayerKind::MaxPool: {
          if (!need_input_grad) break;
          grad_in.setZero(in.rows(), in.cols());
          const auto& idx = argmax[li];
          const std::size_t out_pos = positions(s.out_h, s.out_w);
          for_each_index(exec, static_cast<std::int64_t>(batch), [&](std::int64_t b) {
            for (std::size_t o = 0; o < out_pos; ++o) {
              const auto on = static_cast<Eigen::Index>(static_cast<std::size_t>(b) * out_pos + o);
              for (int c = 0; c < s.out_c; ++c) {
                grad_in(c, idx[static_cast<std::size_t>(on * s.out_c + c)]) += grad_out(c, on);
              }
            }
          });
          break;
        }
        case LayerKind::Flatten:
          if (need_input_grad) {
            grad_in = MapC(grad_out.data(), s.in_c, static_cast<Eigen::Index>(batch * positions(s.in_h, s.in_w)));
          }
          break;
      }
    }
    return loss / static_cast<double>(batch);
  }
};

template <typename T>
Evaluator<T>::Evaluator(const Architecture& arch) : impl_(std::make_unique<Impl>(arch)) {}
template <typename T>
Evaluator<T>::~Evaluator() = default;
template <typename T>
Evaluator<T>::Evaluator(Evaluator&&) noexcept = default;
template <typename T>
Evaluator<T>& Evaluator<T>::operator=(Evaluator&&) noexcept = default;

template <typename T>
void Evaluator<T>::forward(const BasicPolicyModel<T>& model, std::span<const T> inputs, std::size_t batch,
                           Exec exec) {
  impl_->forward(model, inputs, batch, exec);
}

template <typename T>
Vec2 Evaluator<T>::output(std::size_t sample) const {
  const auto& out = impl_->acts.back();
  const auto b = static_cast<Eigen::Index>(sample);
  return {static_cast<double>(out(0, b)), static_cast<double>(out(1, b))};
}

template <typename T>
double Evaluator<T>::backward(const BasicPolicyModel<T>& model, std::span<const Vec2> targets,
                              std::span<T> grads, Exec exec) {
  return impl_->backward(model, targets, grads, exec);
}

template <typename T>
Vec2 forward(const BasicPolicyModel<T>& model, std::span<const T> patch) {
  const auto p = static_cast<std::size_t>(model.arch.input_size);
  if (patch.size() != p * p) throw Error(Errc::ShapeMismatch, "patch does not match model input size");
  Evaluator<T> ev(model.arch);
  ev.forward(model, patch, 1, Exec::Serial);
  return ev.output(0);
}

template <typename T>
std::vector<T> backward(const BasicPolicyModel<T>& model, std::span<const T> patch, Vec2 target) {
  const auto p = static_cast<std::size_t>(model.arch.input_size);
  if (patch.size() != p * p) throw Error(Errc::ShapeMismatch, "patch does not match model input size");
  Evaluator<T> ev(model.arch);
  ev.forward(model, patch, 1, Exec::Serial);
  std::vector<T> grads(model.params.size());
  ev.backward(model, std::span<const Vec2>(&target, 1), grads, Exec::Serial);
  return grads;
}

template <typename T>
void adam_step(BasicPolicyModel<T>& model, std::span<const T> grads, const AdamConfig& cfg) {
  if (grads.size() != model.params.size()) throw Error(Errc::ShapeMismatch, "gradient size");
  model.adam_step += 1;
  const double t = static_cast<double>(model.adam_step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double g = grads[i];
    const double m = cfg.beta1 * model.adam_m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * model.adam_v[i] + (1.0 - cfg.beta2) * g * g;
    model.adam_m[i] = static_cast<T>(m);
    model.adam_v[i] = static_cast<T>(v);
    model.params[i] = static_cast<T>(model.params[i] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps));
  }
}

TrainResult train(const patches::SampleSource& data, PolicyModel initial, const TrainConfig& cfg) {
  if (data.size() == 0) throw Error(Errc::EmptyDataset, "training set is empty");
  if (data.patch_size() != initial.arch.input_size) {
    throw Error(Errc::ShapeMismatch, "dataset patch size does not match model input");
  }
  if (cfg.batch <= 0) throw Error(Errc::BadConfig, "batch size must be positive");

  TrainResult result{std::move(initial), {}};
  auto& model = result.model;
  const std::size_t pp = static_cast<std::size_t>(data.patch_size()) * data.patch_size();
  const std::size_t batch_cap = static_cast<std::size_t>(cfg.batch);
  std::vector<float> inputs(batch_cap * pp);
  std::vector<Vec2> targets(batch_cap);
  std::vector<float> grads(model.params.size());
  Evaluator<float> ev(model.arch);
  std::vector<std::size_t> order(data.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_cap) {
      const std::size_t n = std::min(batch_cap, order.size() - start);
      for_each_index(cfg.exec, static_cast<std::int64_t>(n), [&](std::int64_t k) {
        const auto ks = static_cast<std::size_t>(k);
        std::span<float> patch(inputs.data() + ks * pp, pp);
        data.fetch(order[start + ks], patch, targets[ks]);
        patches::standardize(patch);
      });
      ev.forward(model, std::span<const float>(inputs.data(), n * pp), n, cfg.exec);
      const double loss = ev.backward(model, std::span<const Vec2>(targets.data(), n), grads, cfg.exec);
      adam_step<float>(model, grads, cfg.adam);
      loss_sum += loss * static_cast<double>(n);
    }
    const double mean = loss_sum / static_cast<double>(order.size());
    result.loss_history.push_back(mean);
    if (cfg.on_epoch) cfg.on_epoch(epoch, mean);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const PolicyModel& model, const std::string& path) {
  const auto tensors = describe(model.arch);
  const std::size_t n = model.params.size();
  if (n != parameter_count(model.arch) || model.adam_m.size() != n || model.adam_v.size() != n) {
    throw Error(Errc::ShapeMismatch, "model tensors do not match architecture");
  }
  nlohmann::json tj = nlohmann::json::array();
  const char* sections[] = {"param", "adam_m", "adam_v"};
  for (std::size_t sec = 0; sec < 3; ++sec) {
    for (const auto& t : tensors) {
      tj.push_back({{"name", std::string(sections[sec]) + ":" + t.name},
                    {"shape", t.shape},
                    {"offset", (sec * n + t.offset) * 4},
                    {"bytes", t.count * 4}});
    }
  }
  nlohmann::json header{{"arch", model.arch.to_json()},
                        {"seed", model.seed},
                        {"step", model.adam_step},
                        {"tensors", tj},
                        {"blob_bytes", 3 * n * 4}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
  out << "DPMCKPT1\n" << header.dump() << "\n";
  binary::put_f32s(out, model.params);
  binary::put_f32s(out, model.adam_m);
  binary::put_f32s(out, model.adam_v);
  if (!out) throw Error(Errc::Io, "write failed for " + path);
}

PolicyModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::string magic(9, '\0');
  in.read(magic.data(), 9);
  if (in.gcount() != 9 || magic != "DPMCKPT1\n") throw Error(Errc::BadMagic, "expected DPMCKPT1 in " + path);
  const std::string line = binary::read_line(in, "checkpoint header");

  PolicyModel model;
  std::size_t blob_bytes = 0;
  nlohmann::json tensors_json;
  try {
    const auto header = nlohmann::json::parse(line);
    model.arch = Architecture::from_json(header.at("arch"));
    model.seed = header.at("seed").get<std::uint64_t>();
    model.adam_step = header.at("step").get<std::int64_t>();
    blob_bytes = header.at("blob_bytes").get<std::size_t>();
    tensors_json = header.at("tensors");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadMagic, std::string("bad checkpoint header: ") + e.what());
  }

  const auto tensors = describe(model.arch);
  const std::size_t n = parameter_count(model.arch);
  if (blob_bytes != 3 * n * 4 || tensors_json.size() != 3 * tensors.size()) {
    throw Error(Errc::ShapeMismatch, "checkpoint header does not match its architecture");
  }
  for (std::size_t k = 0; k < tensors_json.size(); ++k) {
    const auto& t = tensors[k % tensors.size()];
    const std::size_t sec = k / tensors.size();
    const auto& tj = tensors_json[k];
    if (tj.at("shape").get<std::vector<int>>() != t.shape ||
        tj.at("offset").get<std::size_t>() != (sec * n + t.offset) * 4 ||
        tj.at("bytes").get<std::size_t>() != t.count * 4) {
      throw Error(Errc::ShapeMismatch, "tensor " + t.name + " does not match architecture");
    }
  }

  std::vector<unsigned char> blob(blob_bytes);
  binary::read_exact(in, reinterpret_cast<char*>(blob.data()), blob.size(), "checkpoint blob");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::ShapeMismatch, "trailing bytes after checkpoint blob");
  }
  auto unpack = [&](std::size_t sec, std::vector<float>& dst) {
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i) dst[i] = binary::get_f32(&blob[(sec * n + i) * 4]);
  };
  unpack(0, model.params);
  unpack(1, model.adam_m);
  unpack(2, model.adam_v);
  return model;
}

template BasicPolicyModel<float> init_model<float>(const Architecture&, std::uint64_t);
template BasicPolicyModel<double> init_model<double>(const Architecture&, std::uint64_t);
template class Evaluator<float>;
template class Evaluator<double>;
template Vec2 forward<float>(const BasicPolicyModel<float>&, std::span<const float>);
template Vec2 forward<double>(const BasicPolicyModel<double>&, std::span<const double>);
template std::vector<float> backward<float>(const BasicPolicyModel<float>&, std::span<const float>, Vec2);
template std::vector<double> backward<double>(const BasicPolicyModel<double>&, std::span<const double>, Vec2);
template void adam_step<float>(BasicPolicyModel<float>&, std::span<const float>, const AdamConfig&);
template void adam_step<double>(BasicPolicyModel<double>&, std::span<const double>, const AdamConfig&);

}  // namespace dpm::model
