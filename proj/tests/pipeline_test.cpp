#include <gtest/gtest.h>

#include "dccf/ablation.hpp"
#include "dccf/pipeline.hpp"
#include "test_util.hpp"

namespace dccf {
namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.d_text = 6;
  c.d_image = 5;
  c.d = 4;
  c.d_v = 4;
  c.objects = 5;
  c.polarity = 3;
  c.iterations = 2;
  c.seed = 21;
  return c;
}

Sample small_sample(std::uint64_t seed, Label label = Label::fake) {
  Rng rng(seed);
  Sample s;
  s.id = "s" + std::to_string(seed);
  s.text = testing::random_vec(rng, 6);
  s.image = testing::random_vec(rng, 5);
  s.objects = {1, 0, 1, 1, 0};
  s.polarity = {0.3, -0.8, 0.0};
  s.label = label;
  return s;
}

// Biases nudged away from zero so relu kinks are not sitting on the probe.
void jitter_biases(DccfModel& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : m.params())
    if (p.name.ends_with(".bias"))
      for (double& b : p.value) b = 0.1 * rng.normal();
}

TEST(Pipeline, EndToEndGradientMatchesFiniteDifferences) {
  for (auto mode : {TensionMode::elementwise, TensionMode::scalar}) {
    TrainConfig c = small_config();
    c.tension_mode = mode;
    DccfModel m = DccfModel::create(c);
    jitter_biases(m, 1);
    for (Label y : {Label::fake, Label::real}) {
      const auto report = gradient_check(m, small_sample(7, y));
      EXPECT_EQ(report.checked, m.param_count());
      EXPECT_TRUE(report.failures.empty())
          << to_string(mode) << ": worst " << report.worst.param << "[" << report.worst.index
          << "] rel " << report.max_rel_error;
    }
  }
}

TEST(Pipeline, PerIterationTransformsGradient) {
  TrainConfig c = small_config();
  c.per_iteration_transform = true;
  c.iterations = 3;
  DccfModel m = DccfModel::create(c);
  jitter_biases(m, 2);
  const auto report = gradient_check(m, small_sample(8));
  EXPECT_TRUE(report.failures.empty()) << report.worst.param << " " << report.max_rel_error;
}

TEST(Pipeline, AblatedModelsGradient) {
  for (const auto& v : standard_ablations()) {
    DccfModel m = DccfModel::create(ablated_config(small_config(), v.flags));
    jitter_biases(m, 3);
    const auto report = gradient_check(m, small_sample(9));
    EXPECT_TRUE(report.failures.empty()) << v.name << ": " << report.worst.param << " " << report.max_rel_error;
  }
}

TEST(Pipeline, ForwardIsPure) {
  DccfModel m = DccfModel::create(small_config());
  const Sample s = small_sample(10);
  const auto a = forward(m, s);
  const auto b = forward(m, s);
  EXPECT_EQ(a.prediction.logit, b.prediction.logit);
  EXPECT_EQ(a.total, b.total);
  SampleTape tape;
  const auto c = forward(m, s, &tape);
  EXPECT_EQ(c.total, a.total);
}

TEST(Pipeline, TwoFeatureSpacesAlwaysReportPairZeroOne) {
  DccfModel m = DccfModel::create(small_config());
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Prediction p = predict(m, small_sample(100 + k));
    EXPECT_EQ(p.fact.first, 0u);
    EXPECT_EQ(p.fact.second, 1u);
    EXPECT_EQ(p.sentiment.first, 0u);
    EXPECT_EQ(p.sentiment.second, 1u);
  }
}

TEST(Pipeline, TotalCombinesTheThreeLosses) {
  DccfModel m = DccfModel::create(small_config());
  const auto r = forward(m, small_sample(11));
  EXPECT_NEAR(r.total, 0.85 * r.final_loss + 0.075 * r.fact_loss + 0.075 * r.sentiment_loss, 1e-14);
}

TEST(Pipeline, RemovedViewContributesZeros) {
  TrainConfig c = small_config();
  c.ablation.no_sentiment_view = true;
  const DccfModel m = DccfModel::create(c);
  const auto r = forward(m, small_sample(12));
  EXPECT_TRUE(r.sentiment.view.empty());
  EXPECT_EQ(r.fact.view.size(), 4u);
}

TEST(Pipeline, NoEvolutionUsesZeroIterations) {
  TrainConfig c = small_config();
  c.ablation.no_evolution = true;
  const DccfModel m = DccfModel::create(c);
  EXPECT_EQ(m.config.iterations, 0u);
  const auto r = forward(m, small_sample(13));
  EXPECT_EQ(r.fact.trace.states.size(), 1u);
}

TEST(Pipeline, CreateIsDeterministic) {
  DccfModel a = DccfModel::create(small_config());
  DccfModel b = DccfModel::create(small_config());
  auto pa = a.params(), pb = b.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(std::equal(pa[i].value.begin(), pa[i].value.end(), pb[i].value.begin()));
  }
}

}  // namespace
}  // namespace dccf
