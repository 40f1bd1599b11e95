#pragma once

// Dual-view fusion, the final real/fake classifier and the combined loss.

#include <cmath>
#include <string>

#include "dccf/numcore.hpp"

namespace dccf {

struct ViewVectors {
  Vec fact;
  Vec sentiment;
};

struct LossWeights {
  double fact = 0.075;       // lambda_F
  double sentiment = 0.075;  // lambda_E

  void validate() const {
    if (!(fact >= 0.0 && fact < 1.0) || !(sentiment >= 0.0 && sentiment < 1.0) ||
        !(fact + sentiment < 1.0)) {
      throw ConfigError("loss weights must satisfy 0 <= lambda_F, lambda_E and lambda_F + "
                        "lambda_E < 1 (got " + std::to_string(fact) + ", " +
                        std::to_string(sentiment) + ")");
    }
  }
};

enum class Label { real = 0, fake = 1 };

inline std::string to_string(Label l) { return l == Label::fake ? "fake" : "real"; }

inline constexpr double kDecisionThreshold = 0.5;

inline Label label_for(double prob_fake) {
  return prob_fake >= kDecisionThreshold ? Label::fake : Label::real;
}

struct ViewAttribution {
  std::size_t first = 0;
  std::size_t second = 1;
  double tension = 0.0;
};

struct Prediction {
  double logit = 0.0;
  double prob_fake = 0.5;
  Label label = Label::fake;
  ViewAttribution fact;
  ViewAttribution sentiment;
};

/// Fact view first, then sentiment view.
inline Vec fuse_views(const ViewVectors& v) {
  if (v.fact.size() != v.sentiment.size()) {
    throw ConfigError("view dims differ: fact " + std::to_string(v.fact.size()) +
                      ", sentiment " + std::to_string(v.sentiment.size()));
  }
  return concat(v.fact, v.sentiment);
}

/// The classifier emits a single logit; prob_fake = sigmoid(logit).
inline Prediction classify(const Mlp& classifier, std::span<const double> fused) {
  if (classifier.dim_out() != 1) throw ConfigError("classifier must have a scalar output");
  Prediction p;
  p.logit = classifier.forward(fused)[0];
  p.prob_fake = sigmoid(p.logit);
  p.label = label_for(p.prob_fake);
  return p;
}

/// BCE of sigmoid(logit) against a 0/1 target, computed stably from the logit.
inline double bce_with_logit(double logit, double target) {
  const double softplus = logit > 0.0 ? logit + std::log1p(std::exp(-logit))
                                      : std::log1p(std::exp(logit));
  return softplus - target * logit;
}

inline double bce_with_logit_grad(double logit, double target) { return sigmoid(logit) - target; }

inline double total_loss(double final_loss, double fact_loss, double sentiment_loss,
                         const LossWeights& w) {
  w.validate();
  return (1.0 - w.fact - w.sentiment) * final_loss + w.fact * fact_loss +
         w.sentiment * sentiment_loss;
}

}  // namespace dccf
