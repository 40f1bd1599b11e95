#pragma once

// Mini-batch training with early stopping, and split evaluation.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dccf/config.hpp"
#include "dccf/data.hpp"
#include "dccf/metrics.hpp"
#include "dccf/pipeline.hpp"

namespace dccf {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  DccfModel model;
  OptimizerState optimizer;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

inline void check_dataset_matches(const TrainConfig& cfg, const DatasetHeader& h) {
  if (h.d_text != cfg.d_text || h.d_image != cfg.d_image || h.objects != cfg.objects ||
      h.polarity != cfg.polarity) {
    throw ConfigError("dataset dims (d_text=" + std::to_string(h.d_text) + ", d_image=" +
                      std::to_string(h.d_image) + ", K=" + std::to_string(h.objects) +
                      ", p=" + std::to_string(h.polarity) + ") do not match the config");
  }
}

inline double split_accuracy(const DccfModel& model, const Dataset& ds,
                             std::span<const std::size_t> indices) {
  std::size_t correct = 0;
  for (std::size_t i : indices) {
    if (predict(model, ds.samples[i]).label == ds.samples[i].label) ++correct;
  }
  return indices.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(indices.size());
}

/// Minimizes the combined loss with Adam on the train split, monitoring
/// validation accuracy; returns the best-validation parameters.
inline TrainResult train(const TrainConfig& cfg, const Dataset& ds, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  check_dataset_matches(cfg, ds.header);
  TrainResult result{DccfModel::create(cfg), {}, {}, 0, 0.0};
  result.optimizer.learning_rate = cfg.learning_rate;
  if (cfg.max_epochs == 0) return result;

  const auto train_idx = ds.indices(Split::train);
  const auto val_idx = ds.indices(Split::val);
  if (train_idx.empty()) throw DataError("dataset has no train split");
  if (val_idx.empty()) throw DataError("dataset has no validation split");

  DccfModel& model = result.model;
  OptimizerState& opt = result.optimizer;
  DccfModel best_model = model;
  OptimizerState best_opt = opt;
  double best_acc = -1.0;
  std::size_t since_best = 0;

  SampleTape tape;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto order = train_idx;
    Rng shuffle_rng(mix_seed(cfg.seed, 0xE90C0000ULL + epoch));
    shuffle_rng.shuffle(order);

    auto params = model.params();
    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = ds.samples[order[b]];
        const SampleResult res = forward(model, s, &tape);
        batch_loss += res.total;
        backward(model, s, res, tape, scale);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(batch_no + 1));
      }
      loss_sum += batch_loss;
      optimizer_step(params, opt);
    }

    EpochRecord rec{epoch + 1, loss_sum / static_cast<double>(order.size()),
                    split_accuracy(model, ds, val_idx)};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      best_model = model;
      best_opt = opt;
      result.best_epoch = rec.epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  result.model = std::move(best_model);
  result.optimizer = std::move(best_opt);
  result.best_val_accuracy = best_acc;
  return result;
}

inline std::vector<Prediction> predict_split(const DccfModel& model, const Dataset& ds, Split split) {
  std::vector<Prediction> out;
  for (std::size_t i : ds.indices(split)) out.push_back(predict(model, ds.samples[i]));
  return out;
}

inline MetricsReport evaluate(const DccfModel& model, const Dataset& ds, Split split) {
  const auto idx = ds.indices(split);
  if (idx.empty()) throw DataError("split '" + to_string(split) + "' is empty");
  std::vector<double> scores;
  std::vector<Label> labels;
  for (std::size_t i : idx) {
    scores.push_back(predict(model, ds.samples[i]).prob_fake);
    labels.push_back(ds.samples[i].label);
  }
  return compute_metrics(scores, labels);
}

}  // namespace dccf
