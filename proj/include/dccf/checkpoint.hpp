#pragma once

// Checkpoint document: config, every layer's shape and row-major values,
// optimizer state and step count, as one JSON object. Doubles are emitted in
// shortest round-trip form, so a save/load cycle is bit-exact.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dccf/config.hpp"
#include "dccf/pipeline.hpp"
#include "json.hpp"

namespace dccf {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  DccfModel model;
  OptimizerState optimizer;
};

namespace detail {

struct LayerRef {
  std::string name;
  DenseLayer* layer;
};

inline void collect_layers(Mlp& mlp, const std::string& prefix, std::vector<LayerRef>& out) {
  for (std::size_t k = 0; k < mlp.layers().size(); ++k) {
    out.push_back({prefix + ".layer" + std::to_string(k), &mlp.layers()[k]});
  }
}

inline std::vector<LayerRef> model_layers(DccfModel& m) {
  std::vector<LayerRef> out;
  collect_layers(m.heads.fact_text, "proj_fact_text", out);
  collect_layers(m.heads.fact_image, "proj_fact_image", out);
  collect_layers(m.heads.sent_text, "proj_sent_text", out);
  collect_layers(m.heads.sent_image, "proj_sent_image", out);
  collect_layers(m.heads.object_head, "object_head", out);
  collect_layers(m.heads.polarity_head, "polarity_head", out);
  for (std::size_t t = 0; t < m.fact_unit.transforms.size(); ++t)
    collect_layers(m.fact_unit.transforms[t], "darfu_fact.g" + std::to_string(t), out);
  for (std::size_t t = 0; t < m.sentiment_unit.transforms.size(); ++t)
    collect_layers(m.sentiment_unit.transforms[t], "darfu_sent.g" + std::to_string(t), out);
  collect_layers(m.fact_std, "g_std_fact", out);
  collect_layers(m.sentiment_std, "g_std_sent", out);
  collect_layers(m.classifier, "classifier", out);
  return out;
}

inline void fill_from_json(std::span<double> dst, const nlohmann::json& src, const std::string& what) {
  if (!src.is_array() || src.size() != dst.size()) {
    throw DataError("checkpoint: '" + what + "' has wrong length");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i].get<double>();
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const Checkpoint& ckpt_in) {
  Checkpoint ckpt = ckpt_in;  // layer views need mutable access
  nlohmann::json j;
  j["format"] = "dccf-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = ckpt.model.config.to_key_values();
  j["step_count"] = ckpt.optimizer.step_count;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [name, layer] : detail::model_layers(ckpt.model)) {
    const auto w = layer->weights.values();
    layers.push_back({{"name", name},
                      {"dim_in", layer->dim_in()},
                      {"dim_out", layer->dim_out()},
                      {"activation", to_string(layer->activation)},
                      {"weights", std::vector<double>(w.begin(), w.end())},
                      {"bias", layer->bias}});
  }
  j["layers"] = std::move(layers);
  const auto& o = ckpt.optimizer;
  j["optimizer"] = {{"method", "adam"},
                    {"learning_rate", o.learning_rate},
                    {"beta1", o.beta1},
                    {"beta2", o.beta2},
                    {"epsilon", o.epsilon},
                    {"step_count", o.step_count},
                    {"first_moment", o.first_moment},
                    {"second_moment", o.second_moment}};
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "dccf-checkpoint") {
      throw DataError("not a dccf checkpoint document");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + j.at("version").dump());
    }
    KeyValues kv = j.at("config").get<KeyValues>();
    TrainConfig cfg = TrainConfig::from_key_values(kv);
    Checkpoint ckpt{DccfModel::create(cfg), {}};
    auto layers = detail::model_layers(ckpt.model);
    const auto& jl = j.at("layers");
    if (jl.size() != layers.size()) {
      throw DataError("checkpoint has " + std::to_string(jl.size()) + " layers, config implies " +
                      std::to_string(layers.size()));
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& src = jl[i];
      DenseLayer& dst = *layers[i].layer;
      if (src.at("name").get<std::string>() != layers[i].name ||
          src.at("dim_in").get<std::size_t>() != dst.dim_in() ||
          src.at("dim_out").get<std::size_t>() != dst.dim_out()) {
        throw DataError("checkpoint layer " + std::to_string(i) + " ('" +
                        src.at("name").get<std::string>() + "') does not match '" + layers[i].name + "'");
      }
      dst.activation = activation_from_string(src.at("activation").get<std::string>());
      detail::fill_from_json(dst.weights.values(), src.at("weights"), layers[i].name + ".weights");
      detail::fill_from_json(dst.bias, src.at("bias"), layers[i].name + ".bias");
    }
    const auto& o = j.at("optimizer");
    ckpt.optimizer.learning_rate = o.at("learning_rate").get<double>();
    ckpt.optimizer.beta1 = o.at("beta1").get<double>();
    ckpt.optimizer.beta2 = o.at("beta2").get<double>();
    ckpt.optimizer.epsilon = o.at("epsilon").get<double>();
    ckpt.optimizer.step_count = o.at("step_count").get<std::uint64_t>();
    ckpt.optimizer.first_moment = o.at("first_moment").get<std::vector<Vec>>();
    ckpt.optimizer.second_moment = o.at("second_moment").get<std::vector<Vec>>();
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& ckpt, std::ostream& os) {
  os << checkpoint_to_json(ckpt).dump(1) << '\n';
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  save_checkpoint(ckpt, os);
}

inline Checkpoint load_checkpoint(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace dccf
