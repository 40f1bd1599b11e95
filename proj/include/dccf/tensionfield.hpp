#pragma once

// Tension-field feature evolution (DARFU) and conflict/consensus extraction.
//
// One evolution step over a feature space S = {f_1..f_n}:
//   T_ij   = (f_i - f_j)^2                       element-wise, a d-vector
//   W_ij   = softmax_j(-T_ij / tau)              per feature dimension
//   f_i'   = f_i + g( sum_j W_ij * f_j )         synchronous over i
// After M steps the pair with the largest (mean-reduced) tension in the last
// tension matrix is the conflict, and the mean of the final state is the
// consensus.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dccf/numcore.hpp"

namespace dccf {

enum class SpaceTag { fact, sentiment };

inline std::string to_string(SpaceTag t) { return t == SpaceTag::fact ? "fact" : "sentiment"; }

enum class TensionMode { elementwise, scalar };

inline std::string to_string(TensionMode m) {
  return m == TensionMode::elementwise ? "elementwise" : "scalar";
}

inline TensionMode tension_mode_from_string(const std::string& s) {
  if (s == "elementwise") return TensionMode::elementwise;
  if (s == "scalar") return TensionMode::scalar;
  throw ConfigError("unknown tension_mode '" + s + "' (expected elementwise or scalar)");
}

struct FeatureSpace {
  std::vector<Vec> features;
  SpaceTag tag = SpaceTag::fact;

  std::size_t size() const noexcept { return features.size(); }
  std::size_t dim() const noexcept { return features.empty() ? 0 : features.front().size(); }

  void validate() const {
    if (features.empty()) throw ConfigError("feature space must hold at least one feature");
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].size() != dim()) {
        throw ConfigError("feature " + std::to_string(i) + " has dim " +
                          std::to_string(features[i].size()) + ", expected " +
                          std::to_string(dim()));
      }
    }
  }

  bool operator==(const FeatureSpace&) const = default;
};

struct TensionMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> elementwise;  // [i][j][k]
  std::vector<double> scalar;       // [i][j], mean over k

  std::span<const double> at(std::size_t i, std::size_t j) const {
    return {elementwise.data() + (i * n + j) * d, d};
  }
  double scalar_at(std::size_t i, std::size_t j) const { return scalar[i * n + j]; }
};

inline TensionMatrix compute_tension(const FeatureSpace& space) {
  space.validate();
  TensionMatrix t;
  t.n = space.size();
  t.d = space.dim();
  t.elementwise.assign(t.n * t.n * t.d, 0.0);
  t.scalar.assign(t.n * t.n, 0.0);
  for (std::size_t i = 0; i < t.n; ++i) {
    for (std::size_t j = i + 1; j < t.n; ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < t.d; ++k) {
        const double diff = space.features[i][k] - space.features[j][k];
        const double sq = diff * diff;
        t.elementwise[(i * t.n + j) * t.d + k] = sq;
        t.elementwise[(j * t.n + i) * t.d + k] = sq;
        sum += sq;
      }
      const double mean = sum / static_cast<double>(t.d);
      t.scalar[i * t.n + j] = mean;
      t.scalar[j * t.n + i] = mean;
    }
  }
  return t;
}

/// Attraction weights W[i][j][k]; every (i, k) slice sums to one over j.
struct AttractionWeights {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(i * n + j) * d + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values[(i * n + j) * d + k];
  }
};

inline AttractionWeights uniform_weights(std::size_t n, std::size_t d) {
  return {n, d, std::vector<double>(n * n * d, 1.0 / static_cast<double>(n))};
}

/// Softmax over j of -T_ij / tau. In scalar mode the mean-reduced tension is
/// used and the resulting weight is broadcast over every dimension.
inline AttractionWeights tension_to_weights(const TensionMatrix& t, double tau,
                                            TensionMode mode = TensionMode::elementwise) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  AttractionWeights w{t.n, t.d, std::vector<double>(t.n * t.n * t.d, 0.0)};
  Vec logits(t.n);
  if (mode == TensionMode::elementwise) {
    for (std::size_t i = 0; i < t.n; ++i) {
      for (std::size_t k = 0; k < t.d; ++k) {
        for (std::size_t j = 0; j < t.n; ++j) logits[j] = -t.elementwise[(i * t.n + j) * t.d + k] / tau;
        const Vec s = softmax(logits);
        for (std::size_t j = 0; j < t.n; ++j) w(i, j, k) = s[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < t.n; ++i) {
      for (std::size_t j = 0; j < t.n; ++j) logits[j] = -t.scalar_at(i, j) / tau;
      const Vec s = softmax(logits);
      for (std::size_t j = 0; j < t.n; ++j)
        for (std::size_t k = 0; k < t.d; ++k) w(i, j, k) = s[j];
    }
  }
  return w;
}

struct DarfuUnit {
  std::vector<Mlp> transforms;  // size 1 (shared over iterations) or M
  double temperature = 1.5;
  std::size_t iterations = 4;
  TensionMode mode = TensionMode::elementwise;
  bool tension_weighting = true;  // false: uniform 1/n weights

  /// g is d -> d with one relu hidden layer of width d and identity output.
  static DarfuUnit create(std::size_t d, std::size_t iterations, double temperature,
                          TensionMode mode, bool per_iteration, Rng& rng) {
    DarfuUnit u;
    u.temperature = temperature;
    u.iterations = iterations;
    u.mode = mode;
    const std::size_t count = per_iteration ? std::max<std::size_t>(iterations, 1) : 1;
    for (std::size_t t = 0; t < count; ++t) {
      u.transforms.push_back(make_mlp({d, d, d}, Activation::relu, Activation::identity, rng));
    }
    u.validate();
    return u;
  }

  const Mlp& transform(std::size_t iteration) const {
    return transforms.size() == 1 ? transforms.front() : transforms.at(iteration);
  }
  Mlp& transform(std::size_t iteration) {
    return transforms.size() == 1 ? transforms.front() : transforms.at(iteration);
  }

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("DARFU temperature must be positive");
    if (transforms.empty()) throw ConfigError("DARFU unit has no transform");
    if (transforms.size() != 1 && transforms.size() < iterations) {
      throw ConfigError("DARFU unit has " + std::to_string(transforms.size()) +
                        " per-iteration transforms for " + std::to_string(iterations) +
                        " iterations");
    }
    for (const auto& g : transforms) {
      if (g.dim_in() != g.dim_out()) throw ConfigError("DARFU transform must map d -> d");
    }
  }

  void zero_grad() {
    for (auto& g : transforms) g.zero_grad();
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t t = 0; t < transforms.size(); ++t) {
      transforms[t].collect_params(prefix + ".g" + std::to_string(t), out);
    }
  }
};

/// What darfu_step_backward needs from the forward pass.
struct DarfuStepTape {
  std::size_t iteration = 0;
  FeatureSpace input;
  AttractionWeights weights;
  std::vector<MlpTape> transform_tapes;
};

inline std::pair<FeatureSpace, TensionMatrix> darfu_step(const FeatureSpace& space,
                                                         const DarfuUnit& unit,
                                                         std::size_t iteration = 0,
                                                         DarfuStepTape* tape = nullptr) {
  space.validate();
  const std::size_t n = space.size();
  const std::size_t d = space.dim();
  const Mlp& g = unit.transform(iteration);
  if (g.dim_in() != d) {
    throw ConfigError("DARFU transform expects dim " + std::to_string(g.dim_in()) +
                      ", feature space has dim " + std::to_string(d));
  }
  TensionMatrix tension = compute_tension(space);
  AttractionWeights w = unit.tension_weighting
                            ? tension_to_weights(tension, unit.temperature, unit.mode)
                            : uniform_weights(n, d);

  FeatureSpace next{std::vector<Vec>(n), space.tag};
  if (tape) {
    tape->iteration = iteration;
    tape->input = space;
    tape->transform_tapes.assign(n, MlpTape{});
  }
  Vec aggregated(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(aggregated.begin(), aggregated.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const Vec& fj = space.features[j];
      for (std::size_t k = 0; k < d; ++k) aggregated[k] += w(i, j, k) * fj[k];
    }
    Vec update = tape ? g.forward(aggregated, tape->transform_tapes[i]) : g.forward(aggregated);
    Vec fi = space.features[i];
    for (std::size_t k = 0; k < d; ++k) fi[k] += update[k];
    if (!all_finite(fi)) {
      throw NumericalError("DARFU produced a non-finite feature at iteration " +
                           std::to_string(iteration) + ", feature " + std::to_string(i));
    }
    next.features[i] = std::move(fi);
  }
  if (tape) tape->weights = std::move(w);
  return {std::move(next), std::move(tension)};
}

/// Gradient of the loss w.r.t. the step input, given the gradient w.r.t. its
/// output. Accumulates into the unit's transform gradients.
inline std::vector<Vec> darfu_step_backward(DarfuUnit& unit, const DarfuStepTape& tape,
                                            const std::vector<Vec>& grad_out) {
  const FeatureSpace& s = tape.input;
  const std::size_t n = s.size();
  const std::size_t d = s.dim();
  const AttractionWeights& w = tape.weights;
  Mlp& g = unit.transform(tape.iteration);

  std::vector<Vec> grad_in = grad_out;  // residual path
  std::vector<double> grad_w(n * n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec grad_agg = g.backward(tape.transform_tapes[i], grad_out[i]);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        grad_w[(i * n + j) * d + k] = grad_agg[k] * s.features[j][k];
        grad_in[j][k] += grad_agg[k] * w(i, j, k);
      }
    }
  }
  if (!unit.tension_weighting) return grad_in;

  const double inv_tau = 1.0 / unit.temperature;
  if (unit.mode == TensionMode::elementwise) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        double weighted = 0.0;
        for (std::size_t j = 0; j < n; ++j) weighted += w(i, j, k) * grad_w[(i * n + j) * d + k];
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double grad_logit = w(i, j, k) * (grad_w[(i * n + j) * d + k] - weighted);
          const double grad_t = -grad_logit * inv_tau;
          const double diff = s.features[i][k] - s.features[j][k];
          grad_in[i][k] += 2.0 * diff * grad_t;
          grad_in[j][k] -= 2.0 * diff * grad_t;
        }
      }
    }
  } else {
    const double inv_d = 1.0 / static_cast<double>(d);
    Vec grad_ws(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += grad_w[(i * n + j) * d + k];
        grad_ws[j] = acc;
      }
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) weighted += w(i, j, 0) * grad_ws[j];
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double grad_t = -w(i, j, 0) * (grad_ws[j] - weighted) * inv_tau;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = s.features[i][k] - s.features[j][k];
          grad_in[i][k] += 2.0 * diff * grad_t * inv_d;
          grad_in[j][k] -= 2.0 * diff * grad_t * inv_d;
        }
      }
    }
  }
  return grad_in;
}

/// states holds S^(0)..S^(M); tensions holds T^(0)..T^(M-1). With M = 0
/// (evolution disabled) the final tension is computed from S^(0).
struct EvolutionTrace {
  std::vector<FeatureSpace> states;
  std::vector<TensionMatrix> tensions;
  TensionMatrix final_tension;

  const FeatureSpace& final_state() const { return states.back(); }
};

inline EvolutionTrace evolve(const FeatureSpace& space, const DarfuUnit& unit,
                             std::vector<DarfuStepTape>* tapes = nullptr) {
  unit.validate();
  space.validate();
  EvolutionTrace trace;
  trace.states.reserve(unit.iterations + 1);
  trace.states.push_back(space);
  if (tapes) tapes->assign(unit.iterations, DarfuStepTape{});
  for (std::size_t t = 0; t < unit.iterations; ++t) {
    auto [next, tension] = darfu_step(trace.states.back(), unit, t, tapes ? &(*tapes)[t] : nullptr);
    trace.states.push_back(std::move(next));
    trace.tensions.push_back(std::move(tension));
  }
  trace.final_tension = trace.tensions.empty() ? compute_tension(space) : trace.tensions.back();
  return trace;
}

inline std::vector<Vec> evolve_backward(DarfuUnit& unit, const std::vector<DarfuStepTape>& tapes,
                                        std::vector<Vec> grad_final) {
  for (std::size_t t = tapes.size(); t-- > 0;) {
    grad_final = darfu_step_backward(unit, tapes[t], grad_final);
  }
  return grad_final;
}

struct Conflict {
  std::size_t first = 0;
  std::size_t second = 1;
  double tension = 0.0;
  Vec features;  // concat(f_first', f_second'), length 2d
};

/// Off-diagonal argmax of the final scalar tension; ties go to the
/// lexicographically smallest (i, j).
inline Conflict extract_conflict(const EvolutionTrace& trace) {
  const TensionMatrix& t = trace.final_tension;
  if (t.n < 2) {
    throw ConfigError("conflict extraction needs at least two features, got " +
                      std::to_string(t.n));
  }
  Conflict c;
  c.tension = t.scalar_at(0, 1);
  for (std::size_t i = 0; i < t.n; ++i) {
    for (std::size_t j = i + 1; j < t.n; ++j) {
      if (t.scalar_at(i, j) > c.tension) {
        c.first = i;
        c.second = j;
        c.tension = t.scalar_at(i, j);
      }
    }
  }
  const auto& s = trace.final_state();
  c.features = concat(s.features[c.first], s.features[c.second]);
  return c;
}

inline Vec extract_consensus(const EvolutionTrace& trace) {
  const FeatureSpace& s = trace.final_state();
  s.validate();
  Vec mean(s.dim(), 0.0);
  for (const auto& f : s.features)
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += f[k];
  const double inv_n = 1.0 / static_cast<double>(s.size());
  for (double& v : mean) v *= inv_n;
  return mean;
}

inline Vec standardization_input(std::span<const double> conflict, std::span<const double> consensus) {
  if (conflict.size() != 2 * consensus.size()) {
    throw ConfigError("conflict vector has dim " + std::to_string(conflict.size()) +
                      ", expected twice the consensus dim " + std::to_string(consensus.size()));
  }
  return concat(conflict, consensus);
}

/// V = g_std(concat(conflict, consensus)).
inline Vec standardize(const Mlp& g_std, std::span<const double> conflict,
                       std::span<const double> consensus) {
  return g_std.forward(standardization_input(conflict, consensus));
}

inline Vec standardize(const Mlp& g_std, std::span<const double> conflict,
                       std::span<const double> consensus, MlpTape& tape) {
  return g_std.forward(standardization_input(conflict, consensus), tape);
}

}  // namespace dccf
