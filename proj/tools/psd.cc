// psd: preposition sense disambiguation pipeline.
//
//   psd ingest --in corpus/ --format semeval --out work/dataset.jsonl
//   psd embed --dataset work/dataset.jsonl --model native:enc/ --cache work/cache
//   psd select-layers --dataset ... --cache ... --out work/choices.jsonl
//   psd train --dataset ... --cache ... --choices ... --out work/models
//   psd evaluate --dataset ... --cache ... --models ... --out work/report.json
//   psd report --in work/report.json --plots work/plots
//   psd augment --dataset ... --rules r.jsonl --lexicon l.jsonl --out aug.jsonl
//   psd tag --models work/models --model native:enc/ "John ate rice with a spoon"
//   psd run-all --config run.cfg
//
// Exit status: 0 success, 2 invalid input, 3 stage failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "psd/augment.h"
#include "psd/cache.h"
#include "psd/classifier.h"
#include "psd/corpus.h"
#include "psd/encoder.h"
#include "psd/errors.h"
#include "psd/pipeline.h"
#include "psd/tagger.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

void Print(const json& j) { std::cout << j.dump(2) << '\n'; }

// Every subcommand reads its paths from the config snapshot; flags overwrite.
struct Options {
  std::optional<fs::path> config_file;
  std::optional<uint64_t> seed;
  bool verbose = false;

  std::string in;
  std::string format;
  std::string inventory;
  std::string out;
  std::string dataset;
  std::string cache;
  std::string choices;
  std::string models;
  std::string report;
  std::string plots;
  std::string model;
  std::string fingerprint;
  std::string rules;
  std::string lexicon;
  std::optional<int> max_tokens;
  std::optional<double> dev_ratio;
  std::optional<uint64_t> dev_seed;
  std::optional<int> hidden;
  std::optional<double> lr;
  std::optional<int> batch;
  std::optional<int> epochs;
  std::optional<int> patience;
  std::optional<int> jobs;
  bool no_retrain = false;
  size_t cap = psd::kDefaultVariantCap;
  std::vector<std::string> text;
  bool json_only = false;
};

psd::PipelineConfig BuildConfig(const Options& o) {
  psd::PipelineConfig c;
  if (o.config_file) c = psd::PipelineConfig::FromFile(*o.config_file);
  auto set = [](fs::path& dst, const std::string& v) {
    if (!v.empty()) dst = v;
  };
  set(c.source, o.in);
  if (!o.format.empty()) c.format = psd::ParseSourceFormat(o.format);
  if (!o.inventory.empty()) c.inventory = o.inventory;
  set(c.dataset, o.dataset);
  set(c.cache, o.cache);
  set(c.choices, o.choices);
  set(c.models, o.models);
  set(c.report, o.report);
  set(c.plots, o.plots);
  if (!o.model.empty()) c.encoder = o.model;
  if (o.max_tokens) c.max_tokens = *o.max_tokens;
  if (o.dev_ratio) c.dev_ratio = *o.dev_ratio;
  if (o.dev_seed) c.dev_seed = *o.dev_seed;
  if (o.seed) c.train.seed = *o.seed;
  if (o.hidden) c.train.hidden_size = *o.hidden;
  if (o.lr) c.train.learning_rate = *o.lr;
  if (o.batch) c.train.batch_size = *o.batch;
  if (o.epochs) c.train.max_epochs = *o.epochs;
  if (o.patience) c.train.patience = *o.patience;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.no_retrain) c.retrain_on_dev = false;
  c.verbose = c.verbose || o.verbose;
  c.train.Validate();
  c.ResolvePaths();
  return c;
}

psd::SweepOptions Sweep(const psd::PipelineConfig& c) {
  return {c.train, c.retrain_on_dev, c.jobs, c.verbose};
}

const fs::path& OutOr(const Options& o, const fs::path& fallback, fs::path& storage) {
  storage = o.out.empty() ? fallback : fs::path(o.out);
  return storage;
}

int Ingest(const Options& o) {
  const auto c = BuildConfig(o);
  if (c.source.empty()) throw psd::ValidationError("ingest needs --in");
  fs::path out;
  const auto stats = psd::RunIngest(c.source, c.format, c.inventory, OutOr(o, c.dataset, out),
                                    c.dev_ratio, c.dev_seed);
  Print(stats.ToJson());
  return 0;
}

int Embed(const Options& o) {
  const auto c = BuildConfig(o);
  if (c.encoder.empty()) throw psd::ValidationError("embed needs --model");
  auto encoder = psd::OpenEncoder(c.encoder, {c.max_tokens});
  psd::CacheStore cache(c.cache);
  const auto report =
      psd::EncodeCorpus(*encoder, psd::LoadDataset(c.dataset), cache, c.verbose);
  json j = report.ToJson();
  j["fingerprint"] = encoder->info().fingerprint;
  j["model_id"] = encoder->info().model_id;
  Print(j);
  return 0;
}

std::string FingerprintFor(const Options& o, const psd::PipelineConfig& c) {
  if (!o.fingerprint.empty()) return o.fingerprint;
  if (!o.model.empty()) return psd::OpenEncoder(c.encoder, {c.max_tokens})->info().fingerprint;
  return psd::ResolveFingerprint(psd::CacheStore(c.cache), "");
}

int SelectLayers(const Options& o) {
  const auto c = BuildConfig(o);
  fs::path out;
  psd::RunSelectLayers(c.dataset, c.cache, FingerprintFor(o, c), OutOr(o, c.choices, out),
                       Sweep(c));
  json summary = json::array();
  for (const auto& choice : psd::ReadChoices(out)) {
    summary.push_back({{"prep", choice.preposition}, {"layer", choice.chosen_layer}});
  }
  Print(summary);
  return 0;
}

int Train(const Options& o) {
  const auto c = BuildConfig(o);
  fs::path out;
  psd::RunTrain(c.dataset, c.cache, c.choices, OutOr(o, c.models, out), Sweep(c));
  json summary = json::object();
  for (const auto& [prep, m] : psd::LoadModels(out)) {
    summary[prep] = {{"layer", m.chosen_layer()}, {"senses", m.label_map().size()}};
  }
  Print(summary);
  return 0;
}

int EvaluateCmd(const Options& o) {
  const auto c = BuildConfig(o);
  fs::path out;
  const json doc = psd::RunEvaluate(c.dataset, c.cache, c.models, OutOr(o, c.report, out));
  Print({{"macro_accuracy", doc["macro_accuracy"]},
         {"micro_accuracy", doc["micro_accuracy"]},
         {"baseline_macro_accuracy", doc["baseline"]["macro_accuracy"]},
         {"report", out.string()}});
  return 0;
}

int Report(const Options& o) {
  const auto c = BuildConfig(o);
  const fs::path in = o.in.empty() ? c.report : fs::path(o.in);
  json files = json::array();
  for (const auto& p : psd::RunReport(in, c.plots)) files.push_back(p.string());
  Print(files);
  return 0;
}

int AugmentCmd(const Options& o) {
  const auto c = BuildConfig(o);
  if (o.rules.empty() || o.lexicon.empty() || o.out.empty()) {
    throw psd::ValidationError("augment needs --rules, --lexicon and --out");
  }
  const psd::Dataset data = psd::LoadDataset(c.dataset);
  const psd::Dataset out = psd::Augment(data, psd::LoadRuleBindings(o.rules),
                                        psd::LoadLexicon(o.lexicon), o.cap);
  psd::SaveDataset(out, o.out);
  Print({{"original", data.instances().size()},
         {"variants", out.instances().size() - data.instances().size()},
         {"out", o.out}});
  return 0;
}

int Tag(const Options& o) {
  const auto c = BuildConfig(o);
  if (c.encoder.empty()) throw psd::ValidationError("tag needs --model");
  std::string text;
  if (o.text.empty()) {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    text = ss.str();
  } else {
    for (const auto& t : o.text) text += (text.empty() ? "" : " ") + t;
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw psd::ValidationError("tag needs non-empty text");
  }
  const auto models = psd::LoadModels(c.models);
  psd::SenseInventory inventory;
  if (c.inventory) {
    inventory = psd::LoadInventory(*c.inventory);
  } else if (fs::exists(psd::InventoryPathFor(c.dataset))) {
    inventory = psd::LoadInventory(psd::InventoryPathFor(c.dataset));
  }
  auto encoder = psd::OpenEncoder(c.encoder, {c.max_tokens});
  const psd::Tagger tagger(models, inventory, *encoder);
  const auto result = tagger.Tag(text);
  if (!o.json_only) std::cout << result.Inline() << '\n';
  Print(result.ToJson());
  return 0;
}

int RunAllCmd(const Options& o) {
  const auto c = BuildConfig(o);
  json stages = json::array();
  for (const auto& s : psd::RunAll(c)) {
    stages.push_back({{"stage", s.stage}, {"executed", s.executed}});
  }
  Print({{"stages", stages}, {"manifest", c.manifest().string()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preposition sense disambiguation over frozen encoder layers"};
  app.require_subcommand(1);
  Options o;
  std::string config_file;
  uint64_t seed = 0;
  app.add_option("--config", config_file, "key = value configuration file")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "training seed");
  app.add_flag("-v,--verbose", o.verbose, "progress on stderr");

  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--hidden", o.hidden, "MLP hidden size");
    sub->add_option("--lr", o.lr, "Adam learning rate");
    sub->add_option("--batch", o.batch, "mini-batch size");
    sub->add_option("--epochs", o.epochs, "maximum epochs");
    sub->add_option("--patience", o.patience, "early-stopping patience");
    sub->add_option("--jobs", o.jobs, "worker threads");
  };

  auto* ingest = app.add_subcommand("ingest", "read a corpus into the native dataset format");
  ingest->add_option("--in", o.in, "corpus file or directory");
  ingest->add_option("--format", o.format, "jsonl or semeval")->default_str("jsonl");
  ingest->add_option("--inventory", o.inventory, "sense inventory JSONL");
  ingest->add_option("--out", o.out, "dataset JSONL to write");
  ingest->add_option("--dev-ratio", o.dev_ratio, "dev fraction carved from train");
  ingest->add_option("--dev-seed", o.dev_seed, "seed for the dev split");

  auto* embed = app.add_subcommand("embed", "cache per-layer head representations");
  embed->add_option("--dataset", o.dataset);
  embed->add_option("--model", o.model, "native:<dir>, worker:<hf model> or <dir>");
  embed->add_option("--cache", o.cache);
  embed->add_option("--max-tokens", o.max_tokens);

  auto* select = app.add_subcommand("select-layers", "pick the best layer per preposition");
  select->add_option("--dataset", o.dataset);
  select->add_option("--cache", o.cache);
  select->add_option("--out", o.out);
  select->add_option("--model", o.model, "encoder whose fingerprint to use");
  select->add_option("--fingerprint", o.fingerprint);
  add_training(select);

  auto* train = app.add_subcommand("train", "train the final per-preposition classifiers");
  train->add_option("--dataset", o.dataset);
  train->add_option("--cache", o.cache);
  train->add_option("--choices", o.choices);
  train->add_option("--out", o.out);
  train->add_flag("--no-retrain", o.no_retrain, "do not refit on train plus dev");
  add_training(train);

  auto* evaluate = app.add_subcommand("evaluate", "score the test split");
  evaluate->add_option("--dataset", o.dataset);
  evaluate->add_option("--cache", o.cache);
  evaluate->add_option("--models", o.models);
  evaluate->add_option("--out", o.out);

  auto* report = app.add_subcommand("report", "render plots from a report");
  report->add_option("--in", o.in);
  report->add_option("--plots", o.plots);

  auto* augment = app.add_subcommand("augment", "lexical-substitution variants");
  augment->add_option("--dataset", o.dataset);
  augment->add_option("--rules", o.rules, "bindings JSONL: {id, index, class}");
  augment->add_option("--lexicon", o.lexicon, "lexicon JSONL: {class, words}");
  augment->add_option("--out", o.out);
  augment->add_option("--cap", o.cap, "variants per instance, 0 for all");

  auto* tag = app.add_subcommand("tag", "label prepositions in raw text");
  tag->add_option("--models", o.models);
  tag->add_option("--model", o.model, "encoder the models were trained on");
  tag->add_option("--inventory", o.inventory);
  tag->add_option("--dataset", o.dataset, "dataset whose inventory sidecar to use");
  tag->add_option("--max-tokens", o.max_tokens);
  tag->add_flag("--json", o.json_only, "JSON output only");
  tag->add_option("text", o.text, "text (read from stdin when absent)");

  auto* run_all = app.add_subcommand("run-all", "run every stage, skipping up-to-date ones");
  run_all->add_option("--in", o.in);
  run_all->add_option("--model", o.model);
  add_training(run_all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }
  if (!config_file.empty()) o.config_file = config_file;
  if (seed_opt->count() > 0) o.seed = seed;

  try {
    if (*ingest) return Ingest(o);
    if (*embed) return Embed(o);
    if (*select) return SelectLayers(o);
    if (*train) return Train(o);
    if (*evaluate) return EvaluateCmd(o);
    if (*report) return Report(o);
    if (*augment) return AugmentCmd(o);
    if (*tag) return Tag(o);
    if (*run_all) return RunAllCmd(o);
  } catch (const psd::ValidationError& e) {
    std::cerr << "psd: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "psd: " << e.what() << '\n';
    return kExitStage;
  }
  return kExitValidation;
}
