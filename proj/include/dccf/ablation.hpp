#pragma once

// Component ablations: each variant switches off one part of the pipeline,
// trains from the same config and seed, and is evaluated on the test split.

#include <string>
#include <vector>

#include "dccf/config.hpp"
#include "dccf/metrics.hpp"
#include "dccf/train.hpp"

namespace dccf {

enum class Ablation {
  fact_loss,
  sentiment_loss,
  both_losses,
  evolution,
  tension_weighting,
  conflict,
  consensus,
  fact_view,
  sentiment_view,
};

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::fact_loss: return "w/o fact loss";
    case Ablation::sentiment_loss: return "w/o sentiment loss";
    case Ablation::both_losses: return "w/o both aux losses";
    case Ablation::evolution: return "w/o evolution";
    case Ablation::tension_weighting: return "w/o tension weighting";
    case Ablation::conflict: return "w/o conflicts";
    case Ablation::consensus: return "w/o global consensus";
    case Ablation::fact_view: return "w/o fact view";
    case Ablation::sentiment_view: return "w/o sentiment view";
  }
  return "?";
}

inline Ablation ablation_from_string(const std::string& s) {
  if (s == "fact_loss") return Ablation::fact_loss;
  if (s == "sentiment_loss") return Ablation::sentiment_loss;
  if (s == "both_losses") return Ablation::both_losses;
  if (s == "evolution") return Ablation::evolution;
  if (s == "tension_weighting") return Ablation::tension_weighting;
  if (s == "conflict") return Ablation::conflict;
  if (s == "consensus") return Ablation::consensus;
  if (s == "fact_view") return Ablation::fact_view;
  if (s == "sentiment_view") return Ablation::sentiment_view;
  throw ConfigError("unknown ablation '" + s + "'");
}

inline void apply_ablation(AblationFlags& f, Ablation a) {
  switch (a) {
    case Ablation::fact_loss: f.no_fact_loss = true; break;
    case Ablation::sentiment_loss: f.no_sentiment_loss = true; break;
    case Ablation::both_losses: f.no_fact_loss = f.no_sentiment_loss = true; break;
    case Ablation::evolution: f.no_evolution = true; break;
    case Ablation::tension_weighting: f.no_tension_weighting = true; break;
    case Ablation::conflict: f.no_conflict = true; break;
    case Ablation::consensus: f.no_consensus = true; break;
    case Ablation::fact_view: f.no_fact_view = true; break;
    case Ablation::sentiment_view: f.no_sentiment_view = true; break;
  }
}

struct AblationVariant {
  std::string name;
  std::vector<Ablation> flags;
};

/// The full component-ablation table: one variant per switch.
inline std::vector<AblationVariant> standard_ablations() {
  std::vector<AblationVariant> out;
  for (Ablation a : {Ablation::fact_loss, Ablation::sentiment_loss, Ablation::both_losses,
                     Ablation::evolution, Ablation::tension_weighting, Ablation::conflict,
                     Ablation::consensus, Ablation::fact_view, Ablation::sentiment_view}) {
    out.push_back({to_string(a), {a}});
  }
  return out;
}

/// Config for a variant, validated; contradictory combinations throw.
inline TrainConfig ablated_config(TrainConfig cfg, const std::vector<Ablation>& flags) {
  for (Ablation a : flags) apply_ablation(cfg.ablation, a);
  cfg.validate();
  return cfg;
}

struct VariantReport {
  std::string name;
  TrainConfig effective;
  MetricsReport metrics;
};

using VariantCallback = std::function<void(const VariantReport&)>;

inline VariantReport run_variant(const TrainConfig& cfg, const Dataset& ds, const AblationVariant& v) {
  const TrainConfig c = ablated_config(cfg, v.flags);
  const TrainResult tr = train(c, ds);
  return {v.name, c.effective(), evaluate(tr.model, ds, Split::test)};
}

/// Trains and evaluates every variant. An empty flag set is the full model.
inline std::vector<VariantReport> run_ablation(const TrainConfig& cfg, const Dataset& ds,
                                               const std::vector<AblationVariant>& variants,
                                               const VariantCallback& on_variant = {}) {
  // Reject contradictory variants before spending time on training.
  for (const auto& v : variants) ablated_config(cfg, v.flags);
  std::vector<VariantReport> out;
  for (const auto& v : variants) {
    out.push_back(run_variant(cfg, ds, v));
    if (on_variant) on_variant(out.back());
  }
  return out;
}

}  // namespace dccf
