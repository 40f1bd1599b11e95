#pragma once

// Serialized outputs: per-sample prediction records, metric records, evolution
// trace documents and the conflict-attribution report.

#include <string>
#include <vector>

#include "dccf/config.hpp"
#include "dccf/metrics.hpp"
#include "dccf/pipeline.hpp"
#include "json.hpp"

namespace dccf {

// ---- Prediction records ----

inline nlohmann::json prediction_record(const std::string& id, const Prediction& p) {
  return {{"id", id},
          {"prob_fake", p.prob_fake},
          {"label", to_string(p.label)},
          {"fact_pair", {p.fact.first, p.fact.second}},
          {"fact_tension", p.fact.tension},
          {"sentiment_pair", {p.sentiment.first, p.sentiment.second}},
          {"sentiment_tension", p.sentiment.tension}};
}

// ---- Metric records ----

inline nlohmann::json metrics_record(const MetricsReport& m, const TrainConfig& cfg,
                                     const std::string& split) {
  nlohmann::json j = {{"split", split},
                      {"accuracy", m.accuracy},
                      {"f1_fake", m.f1_fake},
                      {"f1_real", m.f1_real},
                      {"auc", m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr)},
                      {"tp", m.tp},
                      {"fp", m.fp},
                      {"tn", m.tn},
                      {"fn", m.fn},
                      {"config_hash", config_hash(cfg)}};
  return j;
}

inline MetricsReport metrics_from_record(const nlohmann::json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy").get<double>();
  m.f1_fake = j.at("f1_fake").get<double>();
  m.f1_real = j.at("f1_real").get<double>();
  if (!j.at("auc").is_null()) m.auc = j.at("auc").get<double>();
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.tn = j.at("tn").get<std::size_t>();
  m.fn = j.at("fn").get<std::size_t>();
  return m;
}

// ---- Trace documents ----

struct IterationSummary {
  std::vector<std::vector<double>> tension;  // scalar n x n
  std::vector<double> feature_norms;         // norms of the state the tension was computed on

  bool operator==(const IterationSummary&) const = default;
};

struct TraceSummary {
  std::string space;
  std::vector<IterationSummary> iterations;
  std::vector<double> final_feature_norms;
  std::vector<std::vector<double>> final_tension;

  bool operator==(const TraceSummary&) const = default;
};

inline std::vector<std::vector<double>> scalar_rows(const TensionMatrix& t) {
  std::vector<std::vector<double>> rows(t.n, std::vector<double>(t.n));
  for (std::size_t i = 0; i < t.n; ++i)
    for (std::size_t j = 0; j < t.n; ++j) rows[i][j] = t.scalar_at(i, j);
  return rows;
}

inline std::vector<double> feature_norms(const FeatureSpace& s) {
  std::vector<double> out;
  for (const auto& f : s.features) out.push_back(norm2(f));
  return out;
}

inline TraceSummary summarize_trace(const EvolutionTrace& trace) {
  TraceSummary s;
  s.space = to_string(trace.states.front().tag);
  for (std::size_t t = 0; t < trace.tensions.size(); ++t) {
    s.iterations.push_back({scalar_rows(trace.tensions[t]), feature_norms(trace.states[t])});
  }
  s.final_feature_norms = feature_norms(trace.final_state());
  s.final_tension = scalar_rows(trace.final_tension);
  return s;
}

inline nlohmann::json to_json(const TraceSummary& s) {
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& it : s.iterations) {
    iters.push_back({{"tension", it.tension}, {"feature_norms", it.feature_norms}});
  }
  return {{"space", s.space},
          {"iterations", iters},
          {"final_feature_norms", s.final_feature_norms},
          {"final_tension", s.final_tension}};
}

inline TraceSummary trace_summary_from_json(const nlohmann::json& j) {
  TraceSummary s;
  s.space = j.at("space").get<std::string>();
  for (const auto& it : j.at("iterations")) {
    s.iterations.push_back({it.at("tension").get<std::vector<std::vector<double>>>(),
                            it.at("feature_norms").get<std::vector<double>>()});
  }
  s.final_feature_norms = j.at("final_feature_norms").get<std::vector<double>>();
  s.final_tension = j.at("final_tension").get<std::vector<std::vector<double>>>();
  return s;
}

// ---- Attribution report ----

struct ViewExplanation {
  bool enabled = true;
  std::size_t first = 0;
  std::size_t second = 1;
  double tension = 0.0;
  double consensus_norm = 0.0;
  TraceSummary trace;

  bool operator==(const ViewExplanation&) const = default;
};

struct ExplainReport {
  std::string id;
  double prob_fake = 0.0;
  std::string label;
  std::vector<std::string> feature_names{"text", "image"};
  ViewExplanation fact;
  ViewExplanation sentiment;

  bool operator==(const ExplainReport&) const = default;
};

inline ExplainReport explain(const DccfModel& model, const Sample& sample) {
  const SampleResult res = forward(model, sample);
  ExplainReport r;
  r.id = sample.id;
  r.prob_fake = res.prediction.prob_fake;
  r.label = to_string(res.prediction.label);
  auto fill = [](ViewExplanation& v, const ViewResult& vr, bool enabled) {
    v.enabled = enabled;
    if (!enabled) return;
    v.first = vr.conflict.first;
    v.second = vr.conflict.second;
    v.tension = vr.conflict.tension;
    v.consensus_norm = norm2(vr.consensus);
    v.trace = summarize_trace(vr.trace);
  };
  fill(r.fact, res.fact, !model.config.ablation.no_fact_view);
  fill(r.sentiment, res.sentiment, !model.config.ablation.no_sentiment_view);
  return r;
}

inline nlohmann::json to_json(const ViewExplanation& v) {
  if (!v.enabled) return {{"enabled", false}};
  return {{"enabled", true},
          {"conflict_pair", {v.first, v.second}},
          {"conflict_tension", v.tension},
          {"consensus_norm", v.consensus_norm},
          {"trace", to_json(v.trace)}};
}

inline ViewExplanation view_explanation_from_json(const nlohmann::json& j) {
  ViewExplanation v;
  v.enabled = j.at("enabled").get<bool>();
  if (!v.enabled) return v;
  v.first = j.at("conflict_pair").at(0).get<std::size_t>();
  v.second = j.at("conflict_pair").at(1).get<std::size_t>();
  v.tension = j.at("conflict_tension").get<double>();
  v.consensus_norm = j.at("consensus_norm").get<double>();
  v.trace = trace_summary_from_json(j.at("trace"));
  return v;
}

inline nlohmann::json to_json(const ExplainReport& r) {
  return {{"id", r.id},
          {"prob_fake", r.prob_fake},
          {"label", r.label},
          {"feature_names", r.feature_names},
          {"fact", to_json(r.fact)},
          {"sentiment", to_json(r.sentiment)}};
}

inline ExplainReport explain_report_from_json(const nlohmann::json& j) {
  ExplainReport r;
  r.id = j.at("id").get<std::string>();
  r.prob_fake = j.at("prob_fake").get<double>();
  r.label = j.at("label").get<std::string>();
  r.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  r.fact = view_explanation_from_json(j.at("fact"));
  r.sentiment = view_explanation_from_json(j.at("sentiment"));
  return r;
}

}  // namespace dccf
