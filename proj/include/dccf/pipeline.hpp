#pragma once

// The composed model: project -> evolve (per space) -> conflict/consensus ->
// standardize -> fuse -> classify, with a hand-written backward pass through
// every stage. Feature index 0 is the text feature, index 1 the image feature.

#include <cmath>
#include <string>
#include <vector>

#include "dccf/config.hpp"
#include "dccf/data.hpp"
#include "dccf/disentangler.hpp"
#include "dccf/judgment.hpp"
#include "dccf/numcore.hpp"
#include "dccf/tensionfield.hpp"

namespace dccf {

inline constexpr std::size_t kTextIndex = 0;
inline constexpr std::size_t kImageIndex = 1;

struct DccfModel {
  TrainConfig config;  // effective configuration
  ProjectionHeads heads;
  DarfuUnit fact_unit;
  DarfuUnit sentiment_unit;
  Mlp fact_std;       // 3d -> d_v
  Mlp sentiment_std;  // 3d -> d_v
  Mlp classifier;     // 2 d_v -> 2 d_v (relu) -> 1 logit

  static DccfModel create(const TrainConfig& cfg) {
    cfg.validate();
    DccfModel m;
    m.config = cfg.effective();
    Rng rng(mix_seed(cfg.seed, 0x1417));
    m.heads = ProjectionHeads::create({cfg.d_text, cfg.d_image, cfg.d, cfg.objects, cfg.polarity}, rng);
    // Built with at least one transform so the parameter layout does not
    // depend on the evolution switch.
    const std::size_t m_iter = m.config.iterations;
    m.fact_unit = DarfuUnit::create(cfg.d, std::max<std::size_t>(m_iter, 1), cfg.tau,
                                    cfg.tension_mode, cfg.per_iteration_transform, rng);
    m.sentiment_unit = DarfuUnit::create(cfg.d, std::max<std::size_t>(m_iter, 1), cfg.tau,
                                         cfg.tension_mode, cfg.per_iteration_transform, rng);
    for (DarfuUnit* u : {&m.fact_unit, &m.sentiment_unit}) {
      u->iterations = m_iter;
      u->tension_weighting = !cfg.ablation.no_tension_weighting;
    }
    m.fact_std = make_mlp({3 * cfg.d, cfg.d_v, cfg.d_v}, Activation::relu, Activation::identity, rng);
    m.sentiment_std = make_mlp({3 * cfg.d, cfg.d_v, cfg.d_v}, Activation::relu, Activation::identity, rng);
    m.classifier = make_mlp({2 * cfg.d_v, 2 * cfg.d_v, 1}, Activation::relu, Activation::identity, rng);
    return m;
  }

  /// Every trainable block in a fixed order (checkpoint and optimizer layout).
  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    heads.collect_params(out);
    fact_unit.collect_params("darfu_fact", out);
    sentiment_unit.collect_params("darfu_sent", out);
    fact_std.collect_params("g_std_fact", out);
    sentiment_std.collect_params("g_std_sent", out);
    classifier.collect_params("classifier", out);
    return out;
  }

  void zero_grad() {
    heads.zero_grad();
    fact_unit.zero_grad();
    sentiment_unit.zero_grad();
    fact_std.zero_grad();
    sentiment_std.zero_grad();
    classifier.zero_grad();
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += p.value.size();
    return n;
  }
};

struct ViewResult {
  EvolutionTrace trace;
  Conflict conflict;
  Vec consensus;
  Vec view;  // standardized inconsistency vector V
};

struct SampleResult {
  DisentangledFeatures features;
  ViewResult fact;
  ViewResult sentiment;
  Prediction prediction;
  double final_loss = 0.0;
  double fact_loss = 0.0;
  double sentiment_loss = 0.0;
  double total = 0.0;
};

struct SampleTape {
  ProjectionTape projection;
  std::vector<DarfuStepTape> fact_steps;
  std::vector<DarfuStepTape> sentiment_steps;
  MlpTape fact_std;
  MlpTape sentiment_std;
  MlpTape classifier;
};

namespace detail {

inline ViewResult run_view(const DarfuUnit& unit, const Mlp& g_std, const AblationFlags& ab,
                           FeatureSpace space, std::vector<DarfuStepTape>* steps, MlpTape* std_tape) {
  ViewResult r;
  r.trace = evolve(space, unit, steps);
  r.conflict = extract_conflict(r.trace);
  r.consensus = extract_consensus(r.trace);
  Vec conflict = r.conflict.features;
  Vec consensus = r.consensus;
  if (ab.no_conflict) std::fill(conflict.begin(), conflict.end(), 0.0);
  if (ab.no_consensus) std::fill(consensus.begin(), consensus.end(), 0.0);
  r.view = std_tape ? standardize(g_std, conflict, consensus, *std_tape)
                    : standardize(g_std, conflict, consensus);
  return r;
}

// Gradient w.r.t. the initial feature space of one view.
inline std::vector<Vec> view_backward(DarfuUnit& unit, Mlp& g_std, const AblationFlags& ab,
                                      const ViewResult& r, const std::vector<DarfuStepTape>& steps,
                                      const MlpTape& std_tape, std::span<const double> grad_view) {
  const Vec grad_in = g_std.backward(std_tape, grad_view);
  const FeatureSpace& final_state = r.trace.final_state();
  const std::size_t n = final_state.size();
  const std::size_t d = final_state.dim();
  std::vector<Vec> grad(n, Vec(d, 0.0));
  if (!ab.no_conflict) {
    for (std::size_t k = 0; k < d; ++k) {
      grad[r.conflict.first][k] += grad_in[k];
      grad[r.conflict.second][k] += grad_in[d + k];
    }
  }
  if (!ab.no_consensus) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) grad[i][k] += grad_in[2 * d + k] * inv_n;
  }
  return evolve_backward(unit, steps, std::move(grad));
}

}  // namespace detail

inline SampleResult forward(const DccfModel& model, const Sample& sample, SampleTape* tape = nullptr) {
  const TrainConfig& cfg = model.config;
  const AblationFlags& ab = cfg.ablation;
  SampleResult res;
  res.features = tape ? project(model.heads, sample.raw(), tape->projection)
                      : project(model.heads, sample.raw());
  const auto& f = res.features;

  Vec v_fact(cfg.d_v, 0.0), v_sent(cfg.d_v, 0.0);
  if (!ab.no_fact_view) {
    res.fact = detail::run_view(model.fact_unit, model.fact_std, ab,
                                FeatureSpace{{f.text_fact, f.image_fact}, SpaceTag::fact},
                                tape ? &tape->fact_steps : nullptr, tape ? &tape->fact_std : nullptr);
    v_fact = res.fact.view;
  }
  if (!ab.no_sentiment_view) {
    res.sentiment = detail::run_view(model.sentiment_unit, model.sentiment_std, ab,
                                     FeatureSpace{{f.text_sent, f.image_sent}, SpaceTag::sentiment},
                                     tape ? &tape->sentiment_steps : nullptr,
                                     tape ? &tape->sentiment_std : nullptr);
    v_sent = res.sentiment.view;
  }
  const Vec fused = fuse_views({v_fact, v_sent});
  const double logit = tape ? model.classifier.forward(fused, tape->classifier)[0]
                            : model.classifier.forward(fused)[0];
  if (!std::isfinite(logit)) throw NumericalError("non-finite logit for sample '" + sample.id + "'");

  Prediction& p = res.prediction;
  p.logit = logit;
  p.prob_fake = sigmoid(logit);
  p.label = label_for(p.prob_fake);
  if (!ab.no_fact_view) p.fact = {res.fact.conflict.first, res.fact.conflict.second, res.fact.conflict.tension};
  if (!ab.no_sentiment_view) {
    p.sentiment = {res.sentiment.conflict.first, res.sentiment.conflict.second,
                   res.sentiment.conflict.tension};
  }

  const double y = sample.label == Label::fake ? 1.0 : 0.0;
  res.final_loss = bce_with_logit(logit, y);
  res.fact_loss = fact_loss(model.heads, f, sample.targets());
  res.sentiment_loss = sentiment_loss(model.heads, f, sample.targets());
  res.total = total_loss(res.final_loss, res.fact_loss, res.sentiment_loss, cfg.loss_weights());
  return res;
}

/// Accumulates scale * d(total loss)/d(params) into the model's gradients.
inline void backward(DccfModel& model, const Sample& sample, const SampleResult& res,
                     const SampleTape& tape, double scale) {
  const TrainConfig& cfg = model.config;
  const AblationFlags& ab = cfg.ablation;
  const LossWeights w = cfg.loss_weights();
  const double y = sample.label == Label::fake ? 1.0 : 0.0;

  const double grad_logit =
      scale * (1.0 - w.fact - w.sentiment) * bce_with_logit_grad(res.prediction.logit, y);
  const Vec grad_fused = model.classifier.backward(tape.classifier, Vec{grad_logit});
  const std::size_t dv = cfg.d_v;

  DisentangledFeatures g{Vec(cfg.d, 0.0), Vec(cfg.d, 0.0), Vec(cfg.d, 0.0), Vec(cfg.d, 0.0)};
  if (!ab.no_fact_view) {
    const auto grads = detail::view_backward(
        model.fact_unit, model.fact_std, ab, res.fact, tape.fact_steps, tape.fact_std,
        std::span<const double>(grad_fused.data(), dv));
    g.text_fact = grads[kTextIndex];
    g.image_fact = grads[kImageIndex];
  }
  if (!ab.no_sentiment_view) {
    const auto grads = detail::view_backward(
        model.sentiment_unit, model.sentiment_std, ab, res.sentiment, tape.sentiment_steps,
        tape.sentiment_std, std::span<const double>(grad_fused.data() + dv, dv));
    g.text_sent = grads[kTextIndex];
    g.image_sent = grads[kImageIndex];
  }
  if (w.fact > 0.0) {
    const auto aux = fact_loss_backward(model.heads, res.features, sample.targets(), scale * w.fact);
    for (std::size_t k = 0; k < cfg.d; ++k) g.image_fact[k] += aux.feature_grad[k];
  }
  if (w.sentiment > 0.0) {
    const auto aux =
        sentiment_loss_backward(model.heads, res.features, sample.targets(), scale * w.sentiment);
    for (std::size_t k = 0; k < cfg.d; ++k) g.text_sent[k] += aux.feature_grad[k];
  }
  project_backward(model.heads, tape.projection, g);
}

/// Prediction only, no losses needed by the caller.
inline Prediction predict(const DccfModel& model, const Sample& sample) {
  return forward(model, sample).prediction;
}

/// Mean total loss over `indices` without touching gradients.
inline double mean_loss(const DccfModel& model, const Dataset& ds, std::span<const std::size_t> indices) {
  double s = 0.0;
  for (std::size_t i : indices) s += forward(model, ds.samples[i]).total;
  return indices.empty() ? 0.0 : s / static_cast<double>(indices.size());
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> failures;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// turning round-off into large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares analytic gradients of the total loss on one sample against central
/// differences for every parameter of the model.
inline GradCheckReport gradient_check(DccfModel& model, const Sample& sample, double h = 1e-5,
                                      double tolerance = 1e-4) {
  model.zero_grad();
  SampleTape tape;
  const SampleResult res = forward(model, sample, &tape);
  backward(model, sample, res, tape, 1.0);

  GradCheckReport report;
  for (auto& p : model.params()) {
    const Vec analytic(p.grad.begin(), p.grad.end());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + h;
      const double up = forward(model, sample).total;
      p.value[i] = orig - h;
      const double down = forward(model, sample).total;
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      GradCheckEntry e{p.name, i, analytic[i], numeric, relative_error(analytic[i], numeric)};
      ++report.checked;
      if (e.rel_error > report.max_rel_error) {
        report.max_rel_error = e.rel_error;
        report.worst = e;
      }
      if (e.rel_error >= tolerance) report.failures.push_back(e);
    }
  }
  model.zero_grad();
  return report;
}

}  // namespace dccf
