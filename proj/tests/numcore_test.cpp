#include <gtest/gtest.h>

#include <cmath>

#include "dccf/numcore.hpp"
#include "test_util.hpp"

namespace dccf {
namespace {

using testing::central_difference;
using testing::naive_forward;
using testing::random_vec;
using testing::rel_err;

Mlp identity_layer(std::size_t n) {
  DenseLayer l(n, n, Activation::identity);
  for (std::size_t i = 0; i < n; ++i) l.weights(i, i) = 1.0;
  return Mlp({l});
}

TEST(MlpForward, IdentityLayerPassesInputThrough) {
  const Mlp m = identity_layer(2);
  EXPECT_EQ(m.forward(Vec{2.0, 3.0}), (Vec{2.0, 3.0}));
}

TEST(MlpForward, ZeroSigmoidLayerGivesOneHalf) {
  const Mlp m({DenseLayer(3, 4, Activation::sigmoid)});
  for (double y : m.forward(Vec{-7.0, 0.3, 12.0})) EXPECT_EQ(y, 0.5);
}

TEST(MlpForward, MatchesNaiveOracle) {
  Rng rng(11);
  const Mlp m = make_mlp({3, 4, 2}, Activation::tanh, Activation::tanh, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = random_vec(rng, 3);
    const Vec got = m.forward(x);
    const Vec want = naive_forward(m, x);
    ASSERT_EQ(got.size(), 2u);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(MlpForward, DimensionMismatchIsConfigError) {
  Rng rng(1);
  const Mlp m = make_mlp({3, 2}, Activation::relu, Activation::identity, rng);
  EXPECT_THROW(m.forward(Vec{1.0, 2.0}), ConfigError);
  EXPECT_THROW(Mlp({DenseLayer(3, 4, Activation::relu), DenseLayer(5, 1, Activation::identity)}),
               ConfigError);
}

TEST(MlpForward, DoesNotMutateParameters) {
  Rng rng(5);
  Mlp m = make_mlp({4, 6, 3}, Activation::relu, Activation::sigmoid, rng);
  const Mlp before = m;
  m.forward(random_vec(rng, 4));
  m.forward_cached(random_vec(rng, 4));
  for (std::size_t k = 0; k < m.layers().size(); ++k) {
    EXPECT_EQ(m.layers()[k].weights, before.layers()[k].weights);
    EXPECT_EQ(m.layers()[k].bias, before.layers()[k].bias);
  }
}

TEST(MlpBackward, IdentityLayerChainRule) {
  Mlp m = identity_layer(2);
  const Vec x{2.0, 3.0};
  m.forward_cached(x);
  const Vec grad_in = m.backward(Vec{1.0, 0.0});
  EXPECT_EQ(grad_in, (Vec{1.0, 0.0}));
  const auto& gw = m.layers()[0].grad_weights;
  EXPECT_EQ(gw(0, 0), 2.0);
  EXPECT_EQ(gw(0, 1), 3.0);
  EXPECT_EQ(gw(1, 0), 0.0);
  EXPECT_EQ(gw(1, 1), 0.0);
  EXPECT_EQ(m.layers()[0].grad_bias, (Vec{1.0, 0.0}));
}

TEST(MlpBackward, WithoutForwardIsUsageError) {
  Mlp m = identity_layer(2);
  EXPECT_THROW(m.backward(Vec{1.0, 0.0}), UsageError);
}

TEST(MlpBackward, ZeroUpstreamGradientAccumulatesNothing) {
  Rng rng(3);
  Mlp m = make_mlp({3, 5, 2}, Activation::tanh, Activation::sigmoid, rng);
  m.forward_cached(random_vec(rng, 3));
  const Vec gin = m.backward(Vec{0.0, 0.0});
  for (double g : gin) EXPECT_EQ(g, 0.0);
  for (const auto& l : m.layers()) {
    for (double g : l.grad_weights.values()) EXPECT_EQ(g, 0.0);
    for (double g : l.grad_bias) EXPECT_EQ(g, 0.0);
  }
}

// Loss = <c, mlp(x)> for a fixed random c; checks every parameter and input.
TEST(MlpBackward, MatchesFiniteDifferences) {
  for (Activation act : {Activation::tanh, Activation::sigmoid, Activation::relu, Activation::identity}) {
    Rng rng(42 + static_cast<int>(act));
    Mlp m = make_mlp({4, 6, 5, 3}, act, act, rng);
    for (auto& l : m.layers())
      for (double& b : l.bias) b = rng.normal() * 0.3;
    Vec x = random_vec(rng, 4);
    const Vec c = random_vec(rng, 3);
    auto loss = [&] { return dot(c, m.forward(x)); };

    MlpTape tape;
    m.forward(x, tape);
    const Vec grad_x = m.backward(tape, c);

    std::vector<ParamRef> params;
    m.collect_params("m", params);
    for (auto& p : params) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double fd = central_difference(&p.value[i], loss);
        EXPECT_LT(rel_err(p.grad[i], fd), 1e-4) << to_string(act) << " " << p.name << "[" << i << "]";
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_LT(rel_err(grad_x[i], central_difference(&x[i], loss)), 1e-4);
    }
  }
}

TEST(Optimizer, ZeroGradientLeavesParametersUnchanged) {
  Vec value{0.5, -1.25, 3.0};
  Vec grad(3, 0.0);
  std::vector<ParamRef> params{{"p", value, grad}};
  OptimizerState st;
  optimizer_step(params, st);
  EXPECT_EQ(value, (Vec{0.5, -1.25, 3.0}));
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Optimizer, FirstStepMovesByLearningRate) {
  Vec value{0.0};
  Vec grad{1.0};
  std::vector<ParamRef> params{{"p", value, grad}};
  OptimizerState st;
  st.learning_rate = 0.1;
  optimizer_step(params, st);
  // m_hat = 1, v_hat = 1 after bias correction: step = lr / (1 + eps).
  EXPECT_DOUBLE_EQ(value[0], -0.1 / (1.0 + 1e-8));
  EXPECT_NEAR(value[0], -0.1, 1e-8);
  EXPECT_EQ(grad[0], 0.0);
}

TEST(Optimizer, IsDeterministic) {
  auto run = [] {
    Vec value{0.3, -0.7};
    Vec grad{0.2, -1.5};
    std::vector<ParamRef> params{{"p", value, grad}};
    OptimizerState st;
    optimizer_step(params, st);
    grad = {0.4, 0.1};
    optimizer_step(params, st);
    return std::make_pair(value, st);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Optimizer, NonFiniteGradientAbortsWithoutUpdating) {
  Vec value{1.0, 2.0};
  Vec grad{0.5, std::nan("")};
  std::vector<ParamRef> params{{"blk", value, grad}};
  OptimizerState st;
  try {
    optimizer_step(params, st);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("blk[1]"), std::string::npos);
  }
  EXPECT_EQ(value, (Vec{1.0, 2.0}));
  EXPECT_EQ(st.step_count, 0u);
}

TEST(Softmax, UniformOnEqualInputs) {
  for (double p : softmax(Vec{0.0, 0.0, 0.0})) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, StableForLargeInputs) {
  const Vec p = softmax(Vec{1000.0, 0.0});
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  EXPECT_TRUE(all_finite(p));
}

TEST(Softmax, TwoPointValuesMatchHighPrecision) {
  // 1 / (1 + e^-1) to 40 digits: 0.73105857863000487925...
  const Vec p = softmax(Vec{0.0, -1.0});
  EXPECT_NEAR(p[0], 0.7310585786300048792511592418, 1e-15);
  EXPECT_NEAR(p[1], 0.2689414213699951207488407582, 1e-15);
}

TEST(Softmax, OutputIsSimplexPoint) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec x = random_vec(rng, 1 + rng.index(12), 20.0);
    const Vec p = softmax(x);
    double sum = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Softmax, EmptyInputRejected) { EXPECT_THROW(softmax(Vec{}), ConfigError); }

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs |= x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(7);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u / 10000.0;
  }
  EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(Init, GlorotBoundsRespected) {
  Rng rng(2);
  const DenseLayer l = make_dense(10, 6, Activation::relu, rng);
  const double a = std::sqrt(6.0 / 16.0);
  for (double w : l.weights.values()) {
    EXPECT_GE(w, -a);
    EXPECT_LE(w, a);
  }
  for (double b : l.bias) EXPECT_EQ(b, 0.0);
}

}  // namespace
}  // namespace dccf
