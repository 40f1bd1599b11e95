#pragma once

// TrainConfig and the flat "key = value" document format used for config
// files, CLI overrides and checkpoints.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dccf/data.hpp"
#include "dccf/error.hpp"
#include "dccf/judgment.hpp"
#include "dccf/tensionfield.hpp"

namespace dccf {

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Parses "key = value" lines; '#' starts a comment.
inline KeyValues parse_key_values(std::istream& is) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues parse_key_values(const std::string& text) {
  std::istringstream is(text);
  return parse_key_values(is);
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  return parse_key_values(is);
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

struct AblationFlags {
  bool no_fact_loss = false;
  bool no_sentiment_loss = false;
  bool no_evolution = false;
  bool no_tension_weighting = false;
  bool no_conflict = false;
  bool no_consensus = false;
  bool no_fact_view = false;
  bool no_sentiment_view = false;

  bool any() const {
    return no_fact_loss || no_sentiment_loss || no_evolution || no_tension_weighting ||
           no_conflict || no_consensus || no_fact_view || no_sentiment_view;
  }

  void validate() const {
    if (no_fact_view && no_sentiment_view) {
      throw ConfigError("ablation removes both views; nothing is left to classify");
    }
    if (no_conflict && no_consensus) {
      throw ConfigError("ablation removes both conflict and consensus; views would be constant");
    }
  }

  bool operator==(const AblationFlags&) const = default;
};

struct TrainConfig {
  std::size_t d_text = 32;
  std::size_t d_image = 32;
  std::size_t d = 16;    // fact/sentiment feature dim
  std::size_t d_v = 16;  // standardized view dim
  std::size_t objects = 80;  // K
  std::size_t polarity = 4;  // p
  std::size_t iterations = 4;  // M
  double tau = 1.5;
  double lambda_fact = 0.075;
  double lambda_sentiment = 0.075;
  TensionMode tension_mode = TensionMode::elementwise;
  bool per_iteration_transform = false;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 0;
  SplitFractions split{};
  AblationFlags ablation{};

  LossWeights loss_weights() const { return {lambda_fact, lambda_sentiment}; }

  void validate() const {
    if (d_text == 0 || d_image == 0 || d == 0 || d_v == 0 || objects == 0 || polarity == 0) {
      throw ConfigError("all dims must be positive");
    }
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (iterations == 0 && !ablation.no_evolution) {
      throw ConfigError("iterations must be >= 1 (use no_evolution to disable evolution)");
    }
    loss_weights().validate();
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
    split.validate();
    ablation.validate();
  }

  /// The configuration actually trained: ablation switches folded into the
  /// hyperparameters they override.
  TrainConfig effective() const {
    TrainConfig c = *this;
    if (c.ablation.no_evolution) c.iterations = 0;
    if (c.ablation.no_fact_loss) c.lambda_fact = 0.0;
    if (c.ablation.no_sentiment_loss) c.lambda_sentiment = 0.0;
    return c;
  }

  KeyValues to_key_values() const {
    using detail::format_double;
    auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    return {
        {"d_text", std::to_string(d_text)},
        {"d_image", std::to_string(d_image)},
        {"d", std::to_string(d)},
        {"d_v", std::to_string(d_v)},
        {"K", std::to_string(objects)},
        {"p", std::to_string(polarity)},
        {"M", std::to_string(iterations)},
        {"tau", format_double(tau)},
        {"lambda_F", format_double(lambda_fact)},
        {"lambda_E", format_double(lambda_sentiment)},
        {"tension_mode", to_string(tension_mode)},
        {"per_iteration_transform", b(per_iteration_transform)},
        {"learning_rate", format_double(learning_rate)},
        {"batch_size", std::to_string(batch_size)},
        {"max_epochs", std::to_string(max_epochs)},
        {"early_stop_patience", std::to_string(early_stop_patience)},
        {"seed", std::to_string(seed)},
        {"split_train", format_double(split.train)},
        {"split_val", format_double(split.val)},
        {"split_test", format_double(split.test)},
        {"no_fact_loss", b(ablation.no_fact_loss)},
        {"no_sentiment_loss", b(ablation.no_sentiment_loss)},
        {"no_evolution", b(ablation.no_evolution)},
        {"no_tension_weighting", b(ablation.no_tension_weighting)},
        {"no_conflict", b(ablation.no_conflict)},
        {"no_consensus", b(ablation.no_consensus)},
        {"no_fact_view", b(ablation.no_fact_view)},
        {"no_sentiment_view", b(ablation.no_sentiment_view)},
    };
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : to_key_values()) out += k + " = " + v + "\n";
    return out;
  }

  /// Applies every key in `kv` on top of this config. Unknown keys are errors.
  void apply(const KeyValues& kv) {
    using namespace detail;
    for (const auto& [key, v] : kv) {
      if (key == "d_text") d_text = parse_uint(key, v);
      else if (key == "d_image") d_image = parse_uint(key, v);
      else if (key == "d") d = parse_uint(key, v);
      else if (key == "d_v") d_v = parse_uint(key, v);
      else if (key == "K") objects = parse_uint(key, v);
      else if (key == "p") polarity = parse_uint(key, v);
      else if (key == "M") iterations = parse_uint(key, v);
      else if (key == "tau") tau = parse_double(key, v);
      else if (key == "lambda_F") lambda_fact = parse_double(key, v);
      else if (key == "lambda_E") lambda_sentiment = parse_double(key, v);
      else if (key == "tension_mode") tension_mode = tension_mode_from_string(v);
      else if (key == "per_iteration_transform") per_iteration_transform = parse_bool(key, v);
      else if (key == "learning_rate") learning_rate = parse_double(key, v);
      else if (key == "batch_size") batch_size = parse_uint(key, v);
      else if (key == "max_epochs") max_epochs = parse_uint(key, v);
      else if (key == "early_stop_patience") early_stop_patience = parse_uint(key, v);
      else if (key == "seed") seed = parse_uint(key, v);
      else if (key == "split_train") split.train = parse_double(key, v);
      else if (key == "split_val") split.val = parse_double(key, v);
      else if (key == "split_test") split.test = parse_double(key, v);
      else if (key == "no_fact_loss") ablation.no_fact_loss = parse_bool(key, v);
      else if (key == "no_sentiment_loss") ablation.no_sentiment_loss = parse_bool(key, v);
      else if (key == "no_evolution") ablation.no_evolution = parse_bool(key, v);
      else if (key == "no_tension_weighting") ablation.no_tension_weighting = parse_bool(key, v);
      else if (key == "no_conflict") ablation.no_conflict = parse_bool(key, v);
      else if (key == "no_consensus") ablation.no_consensus = parse_bool(key, v);
      else if (key == "no_fact_view") ablation.no_fact_view = parse_bool(key, v);
      else if (key == "no_sentiment_view") ablation.no_sentiment_view = parse_bool(key, v);
      else throw ConfigError("unknown config key '" + key + "'");
    }
  }

  static TrainConfig from_key_values(const KeyValues& kv) {
    TrainConfig c;
    c.apply(kv);
    c.validate();
    return c;
  }

  bool operator==(const TrainConfig&) const = default;
};

/// FNV-1a over the canonical text of the effective config, as 16 hex digits.
inline std::string config_hash(const TrainConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : c.effective().to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Synthetic-generator settings from the same key = value format.
inline SynthSpec synth_spec_from_key_values(const KeyValues& kv, SynthSpec s = {}) {
  using namespace detail;
  for (const auto& [key, v] : kv) {
    if (key == "n_samples") s.n_samples = parse_uint(key, v);
    else if (key == "d_text") s.d_text = parse_uint(key, v);
    else if (key == "d_image") s.d_image = parse_uint(key, v);
    else if (key == "K") s.objects = parse_uint(key, v);
    else if (key == "p") s.polarity = parse_uint(key, v);
    else if (key == "seed") s.seed = parse_uint(key, v);
    else if (key == "fake_fraction") s.fake_fraction = parse_double(key, v);
    else if (key == "conflict_strength" || key == "sigma_c") s.conflict_strength = parse_double(key, v);
    else if (key == "object_latent") s.object_latent = parse_uint(key, v);
    else if (key == "tone_latent") s.tone_latent = parse_uint(key, v);
    else if (key == "noise") s.noise = parse_double(key, v);
    else if (key == "style_latent") s.style_latent = parse_uint(key, v);
    else if (key == "nonlinear") s.nonlinear = parse_bool(key, v);
    else if (key == "fake_type_mix") {
      std::istringstream is(v);
      std::string part;
      std::size_t i = 0;
      while (std::getline(is, part, ',')) {
        if (i >= 3) throw ConfigError("fake_type_mix takes three comma-separated weights");
        s.fake_type_mix[i++] = parse_double(key, trim(part));
      }
      if (i != 3) throw ConfigError("fake_type_mix takes three comma-separated weights");
    } else {
      throw ConfigError("unknown synthetic spec key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

}  // namespace dccf
