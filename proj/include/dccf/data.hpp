#pragma once

// Sample schema, the line-oriented embedding file format, stratified splits
// and a synthetic generator with controllable cross-modal inconsistency.
//
// File format: the first line is a header object
//   {"dccf_dataset":1,"d_text":..,"d_image":..,"K":..,"p":..,"provenance":".."}
// and every following non-empty line is one sample
//   {"id":"..","label":0|1,"e_T":[..],"e_I":[..],"e_Y":[..],"e_J":[..]}
// with an optional "split":"train"|"val"|"test". Floats are written with 17
// significant digits so values survive a save/load cycle bit-exactly.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dccf/disentangler.hpp"
#include "dccf/judgment.hpp"
#include "dccf/numcore.hpp"
#include "json.hpp"

namespace dccf {

struct Sample {
  std::string id;
  Vec text;      // e_T
  Vec image;     // e_I
  Vec objects;   // e_Y
  Vec polarity;  // e_J
  Label label = Label::real;

  RawEmbeddings raw() const { return {text, image}; }
  AuxTargets targets() const { return {objects, polarity}; }

  bool operator==(const Sample&) const = default;
};

struct DatasetHeader {
  std::size_t d_text = 0;
  std::size_t d_image = 0;
  std::size_t objects = 0;   // K
  std::size_t polarity = 0;  // p
  std::string provenance;

  bool operator==(const DatasetHeader&) const = default;
};

enum class Split { unassigned, train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw DataError("unknown split '" + s + "'");
}

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;
  std::vector<Split> splits;  // parallel to samples

  std::size_t size() const noexcept { return samples.size(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(i);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

inline void validate_sample(const Sample& s, const DatasetHeader& h) {
  auto check_dim = [&](const Vec& v, std::size_t want, const char* field) {
    if (v.size() != want) {
      throw DataError("sample '" + s.id + "': " + field + " has dim " + std::to_string(v.size()) +
                      ", header says " + std::to_string(want));
    }
    if (!all_finite(v)) throw DataError("sample '" + s.id + "': " + field + " is not finite");
  };
  check_dim(s.text, h.d_text, "e_T");
  check_dim(s.image, h.d_image, "e_I");
  check_dim(s.objects, h.objects, "e_Y");
  check_dim(s.polarity, h.polarity, "e_J");
  try {
    check_targets(s.targets());
  } catch (const DataError& e) {
    throw DataError("sample '" + s.id + "': " + e.what());
  }
}

inline void validate_dataset(const Dataset& ds) {
  if (ds.header.d_text == 0 || ds.header.d_image == 0 || ds.header.objects == 0 ||
      ds.header.polarity == 0) {
    throw DataError("dataset header dims must be positive");
  }
  if (ds.splits.size() != ds.samples.size()) {
    throw DataError("split assignment does not cover every sample");
  }
  std::unordered_set<std::string> ids;
  for (const auto& s : ds.samples) {
    validate_sample(s, ds.header);
    if (!ids.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
  }
}

namespace detail {

inline void write_float(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

inline void write_array(std::ostream& os, const Vec& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    write_float(os, v[i]);
  }
  os << ']';
}

inline Vec read_array(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw DataError(std::string("missing or non-array field '") + field + "'");
  }
  Vec out;
  out.reserve(j.at(field).size());
  for (const auto& x : j.at(field)) {
    if (!x.is_number()) throw DataError(std::string("non-numeric entry in '") + field + "'");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, std::ostream& os) {
  nlohmann::json header = {{"dccf_dataset", 1},
                           {"d_text", ds.header.d_text},
                           {"d_image", ds.header.d_image},
                           {"K", ds.header.objects},
                           {"p", ds.header.polarity},
                           {"provenance", ds.header.provenance}};
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    os << "{\"id\":" << nlohmann::json(s.id).dump()
       << ",\"label\":" << static_cast<int>(s.label) << ",\"e_T\":";
    detail::write_array(os, s.text);
    os << ",\"e_I\":";
    detail::write_array(os, s.image);
    os << ",\"e_Y\":";
    detail::write_array(os, s.objects);
    os << ",\"e_J\":";
    detail::write_array(os, s.polarity);
    if (i < ds.splits.size() && ds.splits[i] != Split::unassigned) {
      os << ",\"split\":\"" << to_string(ds.splits[i]) << '"';
    }
    os << "}\n";
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  save_dataset(ds, os);
  if (!os) throw DataError("failed writing '" + path + "'");
}

inline Dataset load_dataset(std::istream& is) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed record (" + e.what() + ")");
    }
    try {
      if (!have_header) {
        if (!j.is_object() || !j.contains("dccf_dataset")) {
          throw DataError("first record must be the dataset header");
        }
        ds.header.d_text = j.at("d_text").get<std::size_t>();
        ds.header.d_image = j.at("d_image").get<std::size_t>();
        ds.header.objects = j.at("K").get<std::size_t>();
        ds.header.polarity = j.at("p").get<std::size_t>();
        ds.header.provenance = j.value("provenance", std::string{});
        have_header = true;
        continue;
      }
      Sample s;
      s.id = j.at("id").get<std::string>();
      const int label = j.at("label").get<int>();
      if (label != 0 && label != 1) throw DataError("label must be 0 (real) or 1 (fake)");
      s.label = static_cast<Label>(label);
      s.text = detail::read_array(j, "e_T");
      s.image = detail::read_array(j, "e_I");
      s.objects = detail::read_array(j, "e_Y");
      s.polarity = detail::read_array(j, "e_J");
      validate_sample(s, ds.header);
      ds.splits.push_back(j.contains("split") ? split_from_string(j.at("split").get<std::string>())
                                              : Split::unassigned);
      ds.samples.push_back(std::move(s));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + "malformed record (" + e.what() + ")");
    }
  }
  if (!have_header) throw DataError("dataset has no header line");
  validate_dataset(ds);
  return ds;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset '" + path + "'");
  return load_dataset(is);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  void validate() const {
    if (train < 0.0 || val < 0.0 || test < 0.0 || std::abs(train + val + test - 1.0) > 1e-9) {
      throw ConfigError("split fractions must be nonnegative and sum to 1");
    }
  }

  bool operator==(const SplitFractions&) const = default;
};

/// Seeded, label-stratified assignment. Within each label group the first
/// round(train * m) shuffled samples go to train, the next round(val * m) to
/// val and the rest to test.
inline Dataset split(Dataset ds, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  ds.splits.assign(ds.samples.size(), Split::unassigned);
  for (Label label : {Label::real, Label::fake}) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (ds.samples[i].label == label) group.push_back(i);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(group);
    const auto m = static_cast<double>(group.size());
    const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * m));
    const auto n_val = std::min(group.size() - n_train,
                                static_cast<std::size_t>(std::llround(fractions.val * m)));
    for (std::size_t r = 0; r < group.size(); ++r) {
      ds.splits[group[r]] = r < n_train ? Split::train
                            : r < n_train + n_val ? Split::val
                                                  : Split::test;
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

enum class FakeType { fact_mismatch, sentiment_mismatch, both };

struct SynthSpec {
  std::size_t n_samples = 2000;
  std::size_t d_text = 32;
  std::size_t d_image = 32;
  std::size_t objects = 80;  // K
  std::size_t polarity = 4;  // p
  std::uint64_t seed = 0;
  double fake_fraction = 0.5;
  double conflict_strength = 2.0;  // sigma_c, in latent standard deviations
  std::array<double, 3> fake_type_mix{1.0, 1.0, 1.0};  // fact, sentiment, both
  std::size_t object_latent = 8;
  std::size_t tone_latent = 4;
  double noise = 0.1;  // embedding observation noise
  std::size_t style_latent = 0;  // modality-specific nuisance dims per modality
  bool nonlinear = false;        // squash embeddings through tanh

  void validate() const {
    if (n_samples == 0 || d_text == 0 || d_image == 0 || objects == 0 || polarity == 0 ||
        object_latent == 0 || tone_latent == 0) {
      throw ConfigError("synthetic spec dims must be positive");
    }
    if (!(fake_fraction > 0.0 && fake_fraction < 1.0)) {
      throw ConfigError("fake_fraction must lie in (0, 1)");
    }
    if (!(conflict_strength >= 0.0)) throw ConfigError("conflict_strength must be >= 0");
    if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
    double total = 0.0;
    for (double w : fake_type_mix) {
      if (!(w >= 0.0)) throw ConfigError("fake type mix weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("fake type mix must have positive mass");
  }
};

namespace detail {

// Fixed generative maps shared by every sample of one synthetic dataset.
struct SynthWorld {
  Matrix text_map;   // d_text x (object_latent + tone_latent)
  Matrix image_map;  // d_image x (object_latent + tone_latent)
  Matrix object_map; // K x object_latent
  Vec object_bias;
  Matrix tone_map;   // p x tone_latent
  Vec object_shift_sign;
  Vec tone_shift_sign;

  explicit SynthWorld(const SynthSpec& spec) {
    Rng rng(mix_seed(spec.seed, 0x5eed));
    const std::size_t latent = spec.object_latent + spec.tone_latent + spec.style_latent;
    auto gaussian = [&](std::size_t rows, std::size_t cols, double scale) {
      Matrix m(rows, cols);
      for (double& v : m.values()) v = rng.normal() * scale;
      return m;
    };
    text_map = gaussian(spec.d_text, latent, 1.0 / std::sqrt(static_cast<double>(latent)));
    image_map = gaussian(spec.d_image, latent, 1.0 / std::sqrt(static_cast<double>(latent)));
    object_map = gaussian(spec.objects, spec.object_latent,
                          1.0 / std::sqrt(static_cast<double>(spec.object_latent)));
    object_bias.resize(spec.objects);
    for (double& b : object_bias) b = rng.normal() * 0.5;
    tone_map = gaussian(spec.polarity, spec.tone_latent,
                        1.0 / std::sqrt(static_cast<double>(spec.tone_latent)));
    object_shift_sign.resize(spec.object_latent);
    for (double& s : object_shift_sign) s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    tone_shift_sign.resize(spec.tone_latent);
    for (double& s : tone_shift_sign) s = rng.uniform() < 0.5 ? -1.0 : 1.0;
  }
};

inline Vec apply(const Matrix& m, std::span<const double> x) {
  Vec out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), x);
  return out;
}

}  // namespace detail

/// Real items draw both embeddings from one shared latent (object and tone
/// parts). Fake items shift the image's object latent (fact mismatch), the
/// text's tone latent (sentiment mismatch) or both, by sigma_c times a
/// half-normal magnitude along a fixed per-dimension sign. Object labels are
/// read from the image latent, polarity from the text latent. The draws of
/// sample i depend only on (seed, i) and its label.
inline Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const detail::SynthWorld world(spec);

  std::vector<Label> labels(spec.n_samples, Label::real);
  const auto n_fake = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.fake_fraction * static_cast<double>(spec.n_samples))),
      0, spec.n_samples);
  for (std::size_t i = 0; i < n_fake; ++i) labels[i] = Label::fake;
  Rng label_rng(mix_seed(spec.seed, 0x1abe1));
  label_rng.shuffle(labels);

  const double mix_total = spec.fake_type_mix[0] + spec.fake_type_mix[1] + spec.fake_type_mix[2];

  Dataset ds;
  ds.header = {spec.d_text, spec.d_image, spec.objects, spec.polarity,
               "synthetic seed=" + std::to_string(spec.seed) +
                   " sigma_c=" + std::to_string(spec.conflict_strength)};
  ds.samples.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    Rng rng(mix_seed(spec.seed, 0x100000 + i));
    Vec obj(spec.object_latent), tone(spec.tone_latent);
    for (double& v : obj) v = rng.normal();
    for (double& v : tone) v = rng.normal();
    Vec image_obj = obj;
    Vec text_tone = tone;

    // Always consumed so real and fake samples use the same stream layout.
    const double type_draw = rng.uniform() * mix_total;
    Vec obj_shift(spec.object_latent), tone_shift(spec.tone_latent);
    for (std::size_t k = 0; k < obj_shift.size(); ++k)
      obj_shift[k] = world.object_shift_sign[k] * std::abs(rng.normal());
    for (std::size_t k = 0; k < tone_shift.size(); ++k)
      tone_shift[k] = world.tone_shift_sign[k] * std::abs(rng.normal());

    if (labels[i] == Label::fake) {
      const FakeType type = type_draw < spec.fake_type_mix[0] ? FakeType::fact_mismatch
                            : type_draw < spec.fake_type_mix[0] + spec.fake_type_mix[1]
                                ? FakeType::sentiment_mismatch
                                : FakeType::both;
      if (type != FakeType::sentiment_mismatch) {
        for (std::size_t k = 0; k < obj.size(); ++k) image_obj[k] += spec.conflict_strength * obj_shift[k];
      }
      if (type != FakeType::fact_mismatch) {
        for (std::size_t k = 0; k < tone.size(); ++k) text_tone[k] += spec.conflict_strength * tone_shift[k];
      }
    }

    Sample s;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", i);
    s.id = id;
    s.label = labels[i];
    Vec text_style(spec.style_latent), image_style(spec.style_latent);
    for (double& v : text_style) v = rng.normal();
    for (double& v : image_style) v = rng.normal();
    s.text = detail::apply(world.text_map, concat(concat(obj, text_tone), text_style));
    s.image = detail::apply(world.image_map, concat(concat(image_obj, tone), image_style));
    if (spec.nonlinear) {
      for (double& v : s.text) v = std::tanh(v);
      for (double& v : s.image) v = std::tanh(v);
    }
    for (double& v : s.text) v += spec.noise * rng.normal();
    for (double& v : s.image) v += spec.noise * rng.normal();
    const Vec activations = detail::apply(world.object_map, image_obj);
    s.objects.resize(spec.objects);
    for (std::size_t k = 0; k < spec.objects; ++k)
      s.objects[k] = activations[k] + world.object_bias[k] > 0.0 ? 1.0 : 0.0;
    const Vec tone_out = detail::apply(world.tone_map, text_tone);
    s.polarity.resize(spec.polarity);
    for (std::size_t k = 0; k < spec.polarity; ++k)
      s.polarity[k] = std::clamp(0.5 * tone_out[k], -1.0, 1.0);
    ds.samples.push_back(std::move(s));
  }
  ds.splits.assign(ds.samples.size(), Split::unassigned);
  return ds;
}

}  // namespace dccf
