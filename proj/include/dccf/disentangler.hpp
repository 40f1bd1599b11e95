#pragma once

// Fact/sentiment projection of raw modality embeddings and the two auxiliary
// supervision losses (object presence BCE, sentiment polarity MSE).

#include <algorithm>
#include <cmath>
#include <string>

#include "dccf/numcore.hpp"

namespace dccf {

struct RawEmbeddings {
  Vec text;
  Vec image;
};

struct AuxTargets {
  Vec objects;   // multi-hot object presence, entries in {0, 1}
  Vec polarity;  // sentiment polarity, entries in [-1, 1]
};

struct DisentangledFeatures {
  Vec text_fact;
  Vec image_fact;
  Vec text_sent;
  Vec image_sent;
};

struct ProjectionDims {
  std::size_t text = 0;
  std::size_t image = 0;
  std::size_t feature = 0;  // d
  std::size_t objects = 0;  // K
  std::size_t polarity = 0; // p
};

/// Four independent projections plus the two auxiliary prediction heads.
struct ProjectionHeads {
  Mlp fact_text;
  Mlp fact_image;
  Mlp sent_text;
  Mlp sent_image;
  Mlp object_head;    // d -> K, sigmoid output
  Mlp polarity_head;  // d -> p, identity output

  /// One hidden relu layer of width d per projection, identity output.
  static ProjectionHeads create(const ProjectionDims& dims, Rng& rng) {
    if (dims.text == 0 || dims.image == 0 || dims.feature == 0 || dims.objects == 0 ||
        dims.polarity == 0) {
      throw ConfigError("projection dims must all be positive");
    }
    const auto d = dims.feature;
    ProjectionHeads h;
    h.fact_text = make_mlp({dims.text, d, d}, Activation::relu, Activation::identity, rng);
    h.fact_image = make_mlp({dims.image, d, d}, Activation::relu, Activation::identity, rng);
    h.sent_text = make_mlp({dims.text, d, d}, Activation::relu, Activation::identity, rng);
    h.sent_image = make_mlp({dims.image, d, d}, Activation::relu, Activation::identity, rng);
    h.object_head = make_mlp({d, dims.objects}, Activation::identity, Activation::sigmoid, rng);
    h.polarity_head = make_mlp({d, dims.polarity}, Activation::identity, Activation::identity, rng);
    return h;
  }

  void zero_grad() {
    for (Mlp* m : {&fact_text, &fact_image, &sent_text, &sent_image, &object_head, &polarity_head})
      m->zero_grad();
  }

  void collect_params(std::vector<ParamRef>& out) {
    fact_text.collect_params("proj_fact_text", out);
    fact_image.collect_params("proj_fact_image", out);
    sent_text.collect_params("proj_sent_text", out);
    sent_image.collect_params("proj_sent_image", out);
    object_head.collect_params("object_head", out);
    polarity_head.collect_params("polarity_head", out);
  }
};

struct ProjectionTape {
  MlpTape fact_text;
  MlpTape fact_image;
  MlpTape sent_text;
  MlpTape sent_image;
};

inline void check_raw(const ProjectionHeads& heads, const RawEmbeddings& raw) {
  if (raw.text.size() != heads.fact_text.dim_in() || raw.text.size() != heads.sent_text.dim_in()) {
    throw ConfigError("text embedding has dim " + std::to_string(raw.text.size()) +
                      ", projection expects " + std::to_string(heads.fact_text.dim_in()));
  }
  if (raw.image.size() != heads.fact_image.dim_in() ||
      raw.image.size() != heads.sent_image.dim_in()) {
    throw ConfigError("image embedding has dim " + std::to_string(raw.image.size()) +
                      ", projection expects " + std::to_string(heads.fact_image.dim_in()));
  }
}

inline DisentangledFeatures project(const ProjectionHeads& heads, const RawEmbeddings& raw) {
  check_raw(heads, raw);
  return {heads.fact_text.forward(raw.text), heads.fact_image.forward(raw.image),
          heads.sent_text.forward(raw.text), heads.sent_image.forward(raw.image)};
}

inline DisentangledFeatures project(const ProjectionHeads& heads, const RawEmbeddings& raw,
                                    ProjectionTape& tape) {
  check_raw(heads, raw);
  return {heads.fact_text.forward(raw.text, tape.fact_text),
          heads.fact_image.forward(raw.image, tape.fact_image),
          heads.sent_text.forward(raw.text, tape.sent_text),
          heads.sent_image.forward(raw.image, tape.sent_image)};
}

/// Backpropagates feature gradients into the four projections. Gradients
/// w.r.t. the raw embeddings are discarded (embeddings are inputs).
inline void project_backward(ProjectionHeads& heads, const ProjectionTape& tape,
                             const DisentangledFeatures& grad) {
  heads.fact_text.backward(tape.fact_text, grad.text_fact);
  heads.fact_image.backward(tape.fact_image, grad.image_fact);
  heads.sent_text.backward(tape.sent_text, grad.text_sent);
  heads.sent_image.backward(tape.sent_image, grad.image_sent);
}

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
inline double bce(std::span<const double> probs, std::span<const double> targets) {
  if (probs.size() != targets.size() || probs.empty()) {
    throw ConfigError("bce: prediction/target size mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = std::clamp(probs[k], kProbClamp, 1.0 - kProbClamp);
    s -= targets[k] * std::log(p) + (1.0 - targets[k]) * std::log(1.0 - p);
  }
  return s / static_cast<double>(probs.size());
}

/// d bce / d probs. Zero where the clamp is active.
inline Vec bce_grad(std::span<const double> probs, std::span<const double> targets) {
  Vec g(probs.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = probs[k];
    if (p < kProbClamp || p > 1.0 - kProbClamp) continue;
    g[k] = inv_n * (p - targets[k]) / (p * (1.0 - p));
  }
  return g;
}

inline double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ConfigError("mse: prediction/target size mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double e = pred[k] - target[k];
    s += e * e;
  }
  return s / static_cast<double>(pred.size());
}

inline Vec mse_grad(std::span<const double> pred, std::span<const double> target) {
  Vec g(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) g[k] = scale * (pred[k] - target[k]);
  return g;
}

inline void check_targets(const AuxTargets& t) {
  for (std::size_t k = 0; k < t.objects.size(); ++k) {
    if (t.objects[k] != 0.0 && t.objects[k] != 1.0) {
      throw DataError("object target entry " + std::to_string(k) + " is " +
                      std::to_string(t.objects[k]) + ", expected 0 or 1");
    }
  }
  for (std::size_t k = 0; k < t.polarity.size(); ++k) {
    if (!(t.polarity[k] >= -1.0 && t.polarity[k] <= 1.0)) {
      throw DataError("polarity target entry " + std::to_string(k) + " is outside [-1, 1]");
    }
  }
}

/// BCE of the object head applied to the image-side fact feature.
inline double fact_loss(const ProjectionHeads& heads, const DisentangledFeatures& feats,
                        const AuxTargets& targets) {
  check_targets(targets);
  return bce(heads.object_head.forward(feats.image_fact), targets.objects);
}

/// MSE of the polarity head applied to the text-side sentiment feature.
inline double sentiment_loss(const ProjectionHeads& heads, const DisentangledFeatures& feats,
                             const AuxTargets& targets) {
  if (feats.text_sent.size() != heads.polarity_head.dim_in()) {
    throw ConfigError("sentiment feature dim does not match polarity head");
  }
  return mse(heads.polarity_head.forward(feats.text_sent), targets.polarity);
}

/// Loss plus its gradient w.r.t. the supervised feature, with head gradients
/// accumulated scaled by `weight`.
struct AuxLossGrad {
  double loss = 0.0;
  Vec feature_grad;
};

inline AuxLossGrad fact_loss_backward(ProjectionHeads& heads, const DisentangledFeatures& feats,
                                      const AuxTargets& targets, double weight) {
  MlpTape tape;
  const Vec probs = heads.object_head.forward(feats.image_fact, tape);
  AuxLossGrad out;
  out.loss = bce(probs, targets.objects);
  Vec g = bce_grad(probs, targets.objects);
  for (double& v : g) v *= weight;
  out.feature_grad = heads.object_head.backward(tape, g);
  return out;
}

inline AuxLossGrad sentiment_loss_backward(ProjectionHeads& heads,
                                           const DisentangledFeatures& feats,
                                           const AuxTargets& targets, double weight) {
  MlpTape tape;
  const Vec pred = heads.polarity_head.forward(feats.text_sent, tape);
  AuxLossGrad out;
  out.loss = mse(pred, targets.polarity);
  Vec g = mse_grad(pred, targets.polarity);
  for (double& v : g) v *= weight;
  out.feature_grad = heads.polarity_head.backward(tape, g);
  return out;
}

}  // namespace dccf
