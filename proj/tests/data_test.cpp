#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dccf/config.hpp"
#include "dccf/data.hpp"
#include "dccf/metrics.hpp"

namespace dccf {
namespace {

const char* kHeader = R"({"dccf_dataset":1,"d_text":2,"d_image":2,"K":2,"p":1})";

Dataset load_text(const std::string& s) {
  std::istringstream is(s);
  return load_dataset(is);
}

std::string record(const std::string& id, const std::string& e_y = "[1,0]",
                   const std::string& e_t = "[0.5,-1]") {
  return R"({"id":")" + id + R"(","label":1,"e_T":)" + e_t + R"(,"e_I":[2,3],"e_Y":)" + e_y +
         R"(,"e_J":[0.25]})";
}

TEST(LoadDataset, HeaderOnlyGivesEmptyDataset) {
  const Dataset ds = load_text(std::string(kHeader) + "\n");
  EXPECT_EQ(ds.size(), 0u);
  EXPECT_EQ(ds.header.d_text, 2u);
  EXPECT_EQ(ds.header.objects, 2u);
}

TEST(LoadDataset, ParsesRecord) {
  const Dataset ds = load_text(std::string(kHeader) + "\n" + record("a") + "\n");
  ASSERT_EQ(ds.size(), 1u);
  const Sample& s = ds.samples[0];
  EXPECT_EQ(s.id, "a");
  EXPECT_EQ(s.label, Label::fake);
  EXPECT_EQ(s.text, (Vec{0.5, -1.0}));
  EXPECT_EQ(s.objects, (Vec{1.0, 0.0}));
  EXPECT_EQ(s.polarity, (Vec{0.25}));
  EXPECT_EQ(ds.splits[0], Split::unassigned);
}

TEST(LoadDataset, NonBinaryObjectTargetRejected) {
  EXPECT_THROW(load_text(std::string(kHeader) + "\n" + record("a", "[0.3,1]") + "\n"), DataError);
}

TEST(LoadDataset, PolarityOutOfRangeRejected) {
  std::string r = record("a");
  r.replace(r.find("0.25"), 4, "1.5");
  EXPECT_THROW(load_text(std::string(kHeader) + "\n" + r + "\n"), DataError);
}

TEST(LoadDataset, MalformedLineReportsLineNumber) {
  try {
    load_text(std::string(kHeader) + "\n" + record("a") + "\n{\"id\": oops\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_EQ(e.exit_code(), 2);
  }
}

TEST(LoadDataset, DimensionMismatchRejected) {
  try {
    load_text(std::string(kHeader) + "\n" + record("a", "[1,0]", "[1,2,3]") + "\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("e_T"), std::string::npos);
  }
}

TEST(LoadDataset, DuplicateIdsRejected) {
  EXPECT_THROW(load_text(std::string(kHeader) + "\n" + record("a") + "\n" + record("a") + "\n"),
               DataError);
}

TEST(LoadDataset, MissingHeaderRejected) {
  EXPECT_THROW(load_text(record("a") + "\n"), DataError);
  EXPECT_THROW(load_text(""), DataError);
}

TEST(Synthetic, RoundTripIsBitExact) {
  SynthSpec spec;
  spec.n_samples = 60;
  spec.seed = 9;
  const Dataset ds = split(generate_synthetic(spec), {}, 4);
  std::stringstream ss;
  save_dataset(ds, ss);
  const Dataset back = load_dataset(ss);
  EXPECT_EQ(back.header.d_text, ds.header.d_text);
  EXPECT_EQ(back.samples, ds.samples);
  EXPECT_EQ(back.splits, ds.splits);
}

TEST(Synthetic, DeterministicPerSeed) {
  SynthSpec spec;
  spec.n_samples = 40;
  spec.seed = 3;
  const Dataset a = generate_synthetic(spec), b = generate_synthetic(spec);
  EXPECT_EQ(a.samples, b.samples);
  spec.seed = 4;
  EXPECT_NE(generate_synthetic(spec).samples, a.samples);
}

TEST(Synthetic, RespectsSpecShapes) {
  SynthSpec spec;
  spec.n_samples = 101;
  spec.d_text = 7;
  spec.d_image = 5;
  spec.objects = 3;
  spec.polarity = 2;
  spec.fake_fraction = 0.3;
  const Dataset ds = generate_synthetic(spec);
  EXPECT_NO_THROW(validate_dataset(ds));
  std::size_t fakes = 0;
  for (const auto& s : ds.samples) fakes += s.label == Label::fake;
  EXPECT_EQ(fakes, 30u);
}

TEST(Synthetic, InvalidSpecRejected) {
  SynthSpec spec;
  spec.fake_fraction = 1.0;
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
  spec = {};
  spec.conflict_strength = -1.0;
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
}

TEST(Split, AllTrain) {
  SynthSpec spec;
  spec.n_samples = 30;
  const Dataset ds = split(generate_synthetic(spec), {1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(ds.indices(Split::train).size(), 30u);
  EXPECT_TRUE(ds.indices(Split::test).empty());
}

TEST(Split, StratifiedAndDeterministic) {
  SynthSpec spec;
  spec.n_samples = 503;
  spec.fake_fraction = 0.37;
  const Dataset base = generate_synthetic(spec);
  const Dataset a = split(base, {}, 11), b = split(base, {}, 11), c = split(base, {}, 12);
  EXPECT_EQ(a.splits, b.splits);
  EXPECT_NE(a.splits, c.splits);
  double overall = 0.0;
  for (const auto& s : base.samples) overall += s.label == Label::fake;
  overall /= static_cast<double>(base.size());
  for (Split sp : {Split::train, Split::val, Split::test}) {
    const auto idx = a.indices(sp);
    double fakes = 0.0;
    for (auto i : idx) fakes += base.samples[i].label == Label::fake;
    EXPECT_LE(std::abs(fakes - overall * static_cast<double>(idx.size())), 1.0 + 1e-9) << to_string(sp);
  }
  EXPECT_EQ(a.indices(Split::train).size() + a.indices(Split::val).size() + a.indices(Split::test).size(), 503u);
}

TEST(Split, BadFractionsRejected) {
  SynthSpec spec;
  spec.n_samples = 10;
  EXPECT_THROW(split(generate_synthetic(spec), {0.5, 0.5, 0.5}, 0), ConfigError);
}

// Logistic regression on [e_T, e_I, e_T*e_I] as an independent separability probe.
double probe_auc(const Dataset& ds) {
  auto feats = [](const Sample& s) {
    Vec x = concat(s.text, s.image);
    for (std::size_t k = 0; k < std::min(s.text.size(), s.image.size()); ++k) x.push_back(s.text[k] * s.image[k]);
    x.push_back(1.0);
    return x;
  };
  const auto tr = ds.indices(Split::train), te = ds.indices(Split::test);
  Vec w(feats(ds.samples[0]).size(), 0.0);
  for (int epoch = 0; epoch < 300; ++epoch) {
    Vec g(w.size(), 0.0);
    for (auto i : tr) {
      const Vec x = feats(ds.samples[i]);
      const double err = sigmoid(dot(w, x)) - (ds.samples[i].label == Label::fake ? 1.0 : 0.0);
      for (std::size_t k = 0; k < w.size(); ++k) g[k] += err * x[k];
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= 0.5 * g[k] / static_cast<double>(tr.size());
  }
  std::vector<double> scores;
  std::vector<Label> labels;
  for (auto i : te) {
    scores.push_back(sigmoid(dot(w, feats(ds.samples[i]))));
    labels.push_back(ds.samples[i].label);
  }
  return *auc_score(scores, labels);
}

TEST(Synthetic, StrongConflictIsLinearlySeparable) {
  SynthSpec spec;
  spec.n_samples = 1000;
  spec.conflict_strength = 5.0;
  EXPECT_GT(probe_auc(split(generate_synthetic(spec), {}, 0)), 0.9);
}

TEST(Synthetic, NoConflictIsNotSeparable) {
  SynthSpec spec;
  spec.n_samples = 1000;
  spec.conflict_strength = 0.0;
  const double auc = probe_auc(split(generate_synthetic(spec), {}, 0));
  EXPECT_GT(auc, 0.35);
  EXPECT_LT(auc, 0.65);
}

TEST(SynthConfig, ParsesKeys) {
  const SynthSpec s = synth_spec_from_key_values(
      parse_key_values("n_samples = 12\nsigma_c = 0.5\nfake_type_mix = 1, 0, 2\nnonlinear = true\n"));
  EXPECT_EQ(s.n_samples, 12u);
  EXPECT_EQ(s.conflict_strength, 0.5);
  EXPECT_EQ(s.fake_type_mix, (std::array<double, 3>{1.0, 0.0, 2.0}));
  EXPECT_TRUE(s.nonlinear);
  EXPECT_THROW(synth_spec_from_key_values(parse_key_values("bogus = 1\n")), ConfigError);
}

}  // namespace
}  // namespace dccf
