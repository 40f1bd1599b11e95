#pragma once

#include <functional>
#include <vector>

#include "dccf/numcore.hpp"

namespace dccf::testing {

inline Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = rng.normal() * scale;
  return v;
}

/// Naive forward pass used as an oracle for Mlp::forward.
inline Vec naive_forward(const Mlp& mlp, const Vec& x) {
  Vec cur = x;
  for (const auto& layer : mlp.layers()) {
    Vec next(layer.dim_out(), 0.0);
    for (std::size_t r = 0; r < layer.dim_out(); ++r) {
      double z = layer.bias[r];
      for (std::size_t c = 0; c < layer.dim_in(); ++c) z += layer.weights(r, c) * cur[c];
      switch (layer.activation) {
        case Activation::relu: next[r] = z > 0 ? z : 0; break;
        case Activation::tanh: next[r] = std::tanh(z); break;
        case Activation::sigmoid: next[r] = 1.0 / (1.0 + std::exp(-z)); break;
        case Activation::identity: next[r] = z; break;
      }
    }
    cur = next;
  }
  return cur;
}

/// Central difference of f with respect to *x.
inline double central_difference(double* x, const std::function<double()>& f, double h = 1e-5) {
  const double orig = *x;
  *x = orig + h;
  const double up = f();
  *x = orig - h;
  const double down = f();
  *x = orig;
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dccf::testing
