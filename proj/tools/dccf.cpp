// dccf command-line front end.
//
//   dccf synth     --out data.jsonl [--config synth.cfg] [--set key=value ...]
//   dccf train     --data data.jsonl --checkpoint model.json [--metrics m.jsonl]
//   dccf eval      --data data.jsonl --checkpoint model.json [--split test] [--predictions p.jsonl]
//   dccf explain   --data data.jsonl --checkpoint model.json --id ID [--out report.json]
//   dccf ablate    --data data.jsonl [--variants a,b,...] [--out records.jsonl]
//   dccf gradcheck [--data data.jsonl]
//
// Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dccf/dccf.hpp"

using namespace dccf;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string metrics;
  std::string predictions;
  std::string split = "test";
  std::string id;
  std::string variants;
};

KeyValues gather(const Options& o) {
  KeyValues kv;
  if (!o.config.empty()) kv = read_key_values(o.config);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  return kv;
}

// Writes to `path`, or stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw DataError("cannot open '" + path + "' for writing");
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

const Sample& find_sample(const Dataset& ds, const std::string& id) {
  for (const auto& s : ds.samples)
    if (s.id == id) return s;
  throw DataError("no sample with id '" + id + "'");
}

int cmd_synth(const Options& o) {
  KeyValues kv = gather(o);
  SplitFractions fr;
  for (auto it = kv.begin(); it != kv.end();) {
    if (it->first == "split_train") fr.train = detail::parse_double(it->first, it->second);
    else if (it->first == "split_val") fr.val = detail::parse_double(it->first, it->second);
    else if (it->first == "split_test") fr.test = detail::parse_double(it->first, it->second);
    else {
      ++it;
      continue;
    }
    it = kv.erase(it);
  }
  const SynthSpec spec = synth_spec_from_key_values(kv);
  const Dataset ds = split(generate_synthetic(spec), fr, spec.seed);
  if (o.out.empty()) throw UsageError("synth needs --out");
  save_dataset(ds, o.out);
  std::fprintf(stderr, "wrote %zu samples (train %zu, val %zu, test %zu) to %s\n", ds.size(),
               ds.indices(Split::train).size(), ds.indices(Split::val).size(),
               ds.indices(Split::test).size(), o.out.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  const TrainConfig cfg = TrainConfig::from_key_values(gather(o));
  const Dataset ds = load_dataset(o.data);
  const TrainResult r = train(cfg, ds, [](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %3zu  train_loss %.6f  val_acc %.4f\n", e.epoch, e.train_loss, e.val_accuracy);
  });
  save_checkpoint({r.model, r.optimizer}, o.checkpoint);
  std::fprintf(stderr, "best epoch %zu (val acc %.4f); checkpoint %s\n", r.best_epoch,
               r.best_val_accuracy, o.checkpoint.c_str());
  Output out(o.metrics);
  for (Split s : {Split::val, Split::test}) {
    if (ds.indices(s).empty()) continue;
    out.os() << metrics_record(evaluate(r.model, ds, s), r.model.config, to_string(s)).dump() << '\n';
  }
  return 0;
}

int cmd_eval(const Options& o) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Dataset ds = load_dataset(o.data);
  check_dataset_matches(ck.model.config, ds.header);
  const Split split = split_from_string(o.split);
  const MetricsReport m = evaluate(ck.model, ds, split);
  Output out(o.metrics);
  out.os() << metrics_record(m, ck.model.config, o.split).dump() << '\n';
  if (!o.predictions.empty()) {
    Output p(o.predictions);
    for (auto i : ds.indices(split))
      p.os() << prediction_record(ds.samples[i].id, predict(ck.model, ds.samples[i])).dump() << '\n';
  }
  return 0;
}

int cmd_explain(const Options& o) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Dataset ds = load_dataset(o.data);
  check_dataset_matches(ck.model.config, ds.header);
  Output out(o.out);
  out.os() << to_json(explain(ck.model, find_sample(ds, o.id))).dump(2) << '\n';
  return 0;
}

int cmd_ablate(const Options& o) {
  const TrainConfig cfg = TrainConfig::from_key_values(gather(o));
  const Dataset ds = load_dataset(o.data);
  std::vector<AblationVariant> variants{{"full", {}}};
  if (o.variants.empty()) {
    for (auto& v : standard_ablations()) variants.push_back(v);
  } else {
    std::istringstream is(o.variants);
    std::string name;
    while (std::getline(is, name, ',')) {
      const Ablation a = ablation_from_string(trim(name));
      variants.push_back({to_string(a), {a}});
    }
  }
  Output out(o.out);
  std::vector<VariantReport> reports = run_ablation(cfg, ds, variants, [&](const VariantReport& r) {
    auto j = metrics_record(r.metrics, r.effective, "test");
    j["variant"] = r.name;
    out.os() << j.dump() << '\n';
    out.os().flush();
  });
  const double full = reports.front().metrics.accuracy;
  std::fprintf(stderr, "%-24s %8s %8s %8s %8s %8s\n", "variant", "acc", "delta", "f1_fake", "f1_real", "auc");
  for (const auto& r : reports) {
    const auto& m = r.metrics;
    std::fprintf(stderr, "%-24s %8.4f %+8.4f %8.4f %8.4f %8.4f\n", r.name.c_str(), m.accuracy,
                 m.accuracy - full, m.f1_fake, m.f1_real, m.auc.value_or(std::nan("")));
  }
  return 0;
}

int cmd_gradcheck(const Options& o) {
  KeyValues kv = gather(o);
  // Small default problem; any key can still be overridden.
  const KeyValues small{{"d_text", "8"}, {"d_image", "6"}, {"d", "4"}, {"d_v", "4"},
                        {"K", "5"},      {"p", "3"},       {"M", "2"}};
  if (o.data.empty())
    for (const auto& [k, v] : small) kv.emplace(k, v);
  const TrainConfig cfg = TrainConfig::from_key_values(kv);
  Sample s;
  if (!o.data.empty()) {
    const Dataset ds = load_dataset(o.data);
    check_dataset_matches(cfg, ds.header);
    if (ds.samples.empty()) throw DataError("dataset is empty");
    s = o.id.empty() ? ds.samples.front() : find_sample(ds, o.id);
  } else {
    Rng rng(mix_seed(cfg.seed, 0x6c));
    s.id = "gradcheck";
    for (std::size_t k = 0; k < cfg.d_text; ++k) s.text.push_back(rng.normal());
    for (std::size_t k = 0; k < cfg.d_image; ++k) s.image.push_back(rng.normal());
    for (std::size_t k = 0; k < cfg.objects; ++k) s.objects.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
    for (std::size_t k = 0; k < cfg.polarity; ++k) s.polarity.push_back(rng.uniform(-1.0, 1.0));
    s.label = Label::fake;
  }
  DccfModel m = DccfModel::create(cfg);
  const GradCheckReport r = gradient_check(m, s);
  std::printf("checked %zu parameters\nmax relative error %.3e at %s[%zu] (analytic %.9g, numeric %.9g)\n"
              "failures (>= 1e-4): %zu\n",
              r.checked, r.max_rel_error, r.worst.param.c_str(), r.worst.index, r.worst.analytic,
              r.worst.numeric, r.failures.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(r.failures.size(), 20); ++i) {
    const auto& f = r.failures[i];
    std::printf("  %s[%zu] analytic %.9g numeric %.9g rel %.3e\n", f.param.c_str(), f.index, f.analytic,
                f.numeric, f.rel_error);
  }
  if (!r.failures.empty()) throw NumericalError("gradient check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic conflict-consensus fake-news detector"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("-c,--config", o.config, "key = value config file");
    c->add_option("-s,--set", o.sets, "override one key (key=value), repeatable");
  };
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  common(synth);
  synth->add_option("-o,--out", o.out, "dataset path")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  common(tr);
  tr->add_option("-d,--data", o.data, "dataset path")->required();
  tr->add_option("--checkpoint", o.checkpoint, "checkpoint output path")->required();
  tr->add_option("-m,--metrics", o.metrics, "metric records output (default stdout)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("-d,--data", o.data, "dataset path")->required();
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint path")->required();
  ev->add_option("--split", o.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("-m,--metrics", o.metrics, "metric record output (default stdout)");
  ev->add_option("-p,--predictions", o.predictions, "per-sample prediction records");

  auto* ex = app.add_subcommand("explain", "conflict attribution for one sample");
  ex->add_option("-d,--data", o.data, "dataset path")->required();
  ex->add_option("--checkpoint", o.checkpoint, "checkpoint path")->required();
  ex->add_option("--id", o.id, "sample id")->required();
  ex->add_option("-o,--out", o.out, "report path (default stdout)");

  auto* ab = app.add_subcommand("ablate", "train and compare ablation variants");
  common(ab);
  ab->add_option("-d,--data", o.data, "dataset path")->required();
  ab->add_option("--variants", o.variants, "comma-separated subset (default: all nine)");
  ab->add_option("-o,--out", o.out, "variant records output (default stdout)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  common(gc);
  gc->add_option("-d,--data", o.data, "take the sample from this dataset");
  gc->add_option("--id", o.id, "sample id within --data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*ex) return cmd_explain(o);
    if (*ab) return cmd_ablate(o);
    if (*gc) return cmd_gradcheck(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "dccf: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dccf: %s\n", e.what());
    return 1;
  }
  return 1;
}
