#pragma once

// Dense vectors and matrices, MLPs with analytic backpropagation, an Adam
// optimizer and a portable seeded RNG. Everything is 64-bit floating point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dccf/error.hpp"

namespace dccf {

using Vec = std::vector<double>;

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Numerically stable softmax: shifts by the max before exponentiating.
inline Vec softmax(std::span<const double> xs) {
  if (xs.empty()) throw ConfigError("softmax of an empty vector");
  const double mx = *std::max_element(xs.begin(), xs.end());
  Vec out(xs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(xs[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(a) ^ (b + 0x632be59bd9b4e019ULL));
}

/// xoshiro256** seeded through splitmix64. The standard library's
/// distributions are implementation-defined, so sampling is done here to keep
/// streams identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) {
      w = mix_seed(s);
      s += 0x9e3779b97f4a7c15ULL;
    }
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(kTwoPi * u2);
    return r * std::cos(kTwoPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n), unbiased.
  std::size_t index(std::size_t n) {
    if (n == 0) throw UsageError("Rng::index with n == 0");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % bound);
  }

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[index(i)]);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::uint64_t state_[4]{};
  std::optional<double> spare_;
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

enum class Activation { relu, tanh, sigmoid, identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::sigmoid: return sigmoid(z);
    case Activation::identity: return z;
  }
  return z;
}

// Derivative expressed through the pre-activation z and output y = act(z).
inline double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

struct DenseLayer {
  Matrix weights;  // dim_out x dim_in
  Vec bias;
  Activation activation = Activation::identity;
  Matrix grad_weights;
  Vec grad_bias;

  DenseLayer() = default;
  DenseLayer(std::size_t dim_in, std::size_t dim_out, Activation act)
      : weights(dim_out, dim_in),
        bias(dim_out, 0.0),
        activation(act),
        grad_weights(dim_out, dim_in),
        grad_bias(dim_out, 0.0) {}

  std::size_t dim_in() const noexcept { return weights.cols(); }
  std::size_t dim_out() const noexcept { return weights.rows(); }

  void zero_grad() {
    grad_weights.fill(0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  }
};

/// Intermediate values of one MLP forward pass, consumed by backward.
struct MlpTape {
  std::vector<Vec> inputs;  // input to each layer
  std::vector<Vec> pre;     // pre-activation of each layer
  Vec output;
};

/// Named view of one trainable parameter block and its gradient buffer.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_chain(); }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  bool empty() const noexcept { return layers_.empty(); }

  std::size_t dim_in() const { return layers_.empty() ? 0 : layers_.front().dim_in(); }
  std::size_t dim_out() const { return layers_.empty() ? 0 : layers_.back().dim_out(); }

  Vec forward(std::span<const double> x) const {
    check_input(x);
    Vec cur(x.begin(), x.end());
    for (const auto& layer : layers_) {
      Vec next(layer.dim_out());
      for (std::size_t r = 0; r < layer.dim_out(); ++r) {
        next[r] = activate(layer.activation, layer.bias[r] + dot(layer.weights.row(r), cur));
      }
      cur = std::move(next);
    }
    return cur;
  }

  Vec forward(std::span<const double> x, MlpTape& tape) const {
    check_input(x);
    tape.inputs.resize(layers_.size());
    tape.pre.resize(layers_.size());
    Vec cur(x.begin(), x.end());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& layer = layers_[k];
      Vec z(layer.dim_out());
      Vec y(layer.dim_out());
      for (std::size_t r = 0; r < layer.dim_out(); ++r) {
        z[r] = layer.bias[r] + dot(layer.weights.row(r), cur);
        y[r] = activate(layer.activation, z[r]);
      }
      tape.inputs[k] = std::move(cur);
      tape.pre[k] = std::move(z);
      cur = std::move(y);
    }
    tape.output = cur;
    return cur;
  }

  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  Vec backward(const MlpTape& tape, std::span<const double> grad_out) {
    if (tape.inputs.size() != layers_.size()) {
      throw UsageError("Mlp::backward: tape does not belong to this network");
    }
    if (grad_out.size() != dim_out()) {
      throw ConfigError("Mlp::backward: gradient has dim " + std::to_string(grad_out.size()) +
                        ", expected " + std::to_string(dim_out()));
    }
    Vec grad(grad_out.begin(), grad_out.end());
    for (std::size_t k = layers_.size(); k-- > 0;) {
      auto& layer = layers_[k];
      const Vec& in = tape.inputs[k];
      const Vec& z = tape.pre[k];
      const Vec& y = (k + 1 < layers_.size()) ? tape.inputs[k + 1] : tape.output;
      Vec grad_in(layer.dim_in(), 0.0);
      for (std::size_t r = 0; r < layer.dim_out(); ++r) {
        const double gz = grad[r] * activate_grad(layer.activation, z[r], y[r]);
        if (gz == 0.0) continue;
        layer.grad_bias[r] += gz;
        auto gw = layer.grad_weights.row(r);
        const auto w = layer.weights.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) {
          gw[c] += gz * in[c];
          grad_in[c] += gz * w[c];
        }
      }
      grad = std::move(grad_in);
    }
    return grad;
  }

  /// Forward pass that remembers its tape for a later backward(grad_out).
  Vec forward_cached(std::span<const double> x) {
    MlpTape tape;
    Vec out = forward(x, tape);
    cached_ = std::move(tape);
    return out;
  }

  Vec backward(std::span<const double> grad_out) {
    if (!cached_) throw UsageError("Mlp::backward called without a cached forward pass");
    return backward(*cached_, grad_out);
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      auto& l = layers_[k];
      const std::string base = prefix + ".layer" + std::to_string(k);
      out.push_back({base + ".weights", l.weights.values(), l.grad_weights.values()});
      out.push_back({base + ".bias", l.bias, l.grad_bias});
    }
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

 private:
  void check_chain() const {
    for (std::size_t k = 1; k < layers_.size(); ++k) {
      if (layers_[k].dim_in() != layers_[k - 1].dim_out()) {
        throw ConfigError("Mlp: layer " + std::to_string(k) + " expects input dim " +
                          std::to_string(layers_[k].dim_in()) + " but previous layer emits " +
                          std::to_string(layers_[k - 1].dim_out()));
      }
    }
  }

  void check_input(std::span<const double> x) const {
    if (layers_.empty()) throw ConfigError("Mlp: network has no layers");
    if (x.size() != dim_in()) {
      throw ConfigError("Mlp: input has dim " + std::to_string(x.size()) + ", expected " +
                        std::to_string(dim_in()));
    }
  }

  std::vector<DenseLayer> layers_;
  std::optional<MlpTape> cached_;
};

/// Glorot-uniform weights in [-a, a], a = sqrt(6 / (dim_in + dim_out)); zero bias.
inline DenseLayer make_dense(std::size_t dim_in, std::size_t dim_out, Activation act, Rng& rng) {
  if (dim_in == 0 || dim_out == 0) throw ConfigError("dense layer with zero dimension");
  DenseLayer layer(dim_in, dim_out, act);
  const double a = std::sqrt(6.0 / static_cast<double>(dim_in + dim_out));
  for (double& w : layer.weights.values()) w = rng.uniform(-a, a);
  return layer;
}

/// dims = {in, hidden..., out}; hidden layers use `hidden`, the last `output`.
inline Mlp make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation output,
                    Rng& rng) {
  if (dims.size() < 2) throw ConfigError("make_mlp needs at least input and output dims");
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const bool last = k + 2 == dims.size();
    layers.push_back(make_dense(dims[k], dims[k + 1], last ? output : hidden, rng));
  }
  return Mlp(std::move(layers));
}

inline Mlp make_mlp(std::initializer_list<std::size_t> dims, Activation hidden,
                    Activation output, Rng& rng) {
  return make_mlp(std::span<const std::size_t>(dims.begin(), dims.size()), hidden, output, rng);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct OptimizerState {
  std::vector<Vec> first_moment;
  std::vector<Vec> second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("optimizer betas must lie in [0, 1)");
    }
    if (!(learning_rate > 0.0) || !(epsilon > 0.0)) {
      throw ConfigError("optimizer learning rate and epsilon must be positive");
    }
  }

  bool operator==(const OptimizerState&) const = default;
};

/// One Adam update with bias correction, then zeroes the gradients. A
/// non-finite gradient aborts the step before any parameter is touched.
inline void optimizer_step(std::span<const ParamRef> params, OptimizerState& state) {
  state.validate();
  for (const auto& p : params) {
    if (p.value.size() != p.grad.size()) {
      throw ConfigError("optimizer_step: parameter/gradient shape mismatch for " + p.name);
    }
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        throw NumericalError("optimizer_step: non-finite gradient " + std::to_string(p.grad[i]) +
                             " in " + p.name + "[" + std::to_string(i) + "] at step " +
                             std::to_string(state.step_count));
      }
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value.size(), 0.0);
      state.second_moment.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ConfigError("optimizer_step: optimizer state has " +
                      std::to_string(state.first_moment.size()) + " blocks, model has " +
                      std::to_string(params.size()));
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    if (m.size() != p.value.size()) {
      throw ConfigError("optimizer_step: moment buffer shape mismatch for " + p.name);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
      p.grad[i] = 0.0;
    }
  }
}

}  // namespace dccf
