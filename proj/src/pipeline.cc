#include "psd/pipeline.h"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include "psd/digest.h"
#include "psd/encoder.h"
#include "psd/errors.h"
#include "psd/evaluation.h"
#include "psd/plots.h"
#include "psd/text.h"

namespace psd {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// PipelineConfig

namespace {

bool ParseBool(const std::string& key, const std::string& v) {
  const std::string s = Lowercase(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ValidationError("config key " + key + ": expected a boolean, got \"" + v + "\"");
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(v, &used);
    } else if constexpr (std::is_same_v<T, uint64_t>) {
      out = std::stoull(v, &used);
    } else {
      out = static_cast<T>(std::stol(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + ": expected a number, got \"" + v + "\"");
  }
}

}  // namespace

std::map<std::string, std::string> PipelineConfig::ReadKeyValues(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (NormalizeSpace(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": expected key = value");
    }
    out[NormalizeSpace(line.substr(0, eq))] = NormalizeSpace(line.substr(eq + 1));
  }
  return out;
}

void PipelineConfig::Apply(const std::map<std::string, std::string>& values) {
  for (const auto& [key, v] : values) {
    if (key == "source") source = v;
    else if (key == "format") format = ParseSourceFormat(v);
    else if (key == "inventory") inventory = v.empty() ? std::nullopt : std::optional<fs::path>(v);
    else if (key == "work_dir") work_dir = v;
    else if (key == "dataset") dataset = v;
    else if (key == "cache") cache = v;
    else if (key == "choices") choices = v;
    else if (key == "models") models = v;
    else if (key == "report") report = v;
    else if (key == "plots") plots = v;
    else if (key == "encoder" || key == "model") encoder = v;
    else if (key == "max_tokens") max_tokens = ParseNumber<int>(key, v);
    else if (key == "dev_ratio") dev_ratio = ParseNumber<double>(key, v);
    else if (key == "dev_seed") dev_seed = ParseNumber<uint64_t>(key, v);
    else if (key == "seed") train.seed = ParseNumber<uint64_t>(key, v);
    else if (key == "hidden_size") train.hidden_size = ParseNumber<int>(key, v);
    else if (key == "learning_rate") train.learning_rate = ParseNumber<double>(key, v);
    else if (key == "beta1") train.beta1 = ParseNumber<double>(key, v);
    else if (key == "beta2") train.beta2 = ParseNumber<double>(key, v);
    else if (key == "batch_size") train.batch_size = ParseNumber<int>(key, v);
    else if (key == "max_epochs") train.max_epochs = ParseNumber<int>(key, v);
    else if (key == "patience") train.patience = ParseNumber<int>(key, v);
    else if (key == "retrain_on_dev") retrain_on_dev = ParseBool(key, v);
    else if (key == "jobs") jobs = ParseNumber<int>(key, v);
    else if (key == "verbose") verbose = ParseBool(key, v);
    else throw ValidationError("unknown config key \"" + key + "\"");
  }
  train.Validate();
}

PipelineConfig PipelineConfig::FromFile(const fs::path& path) {
  PipelineConfig c;
  c.Apply(ReadKeyValues(path));
  return c;
}

void PipelineConfig::ResolvePaths() {
  if (dataset.empty()) dataset = work_dir / "dataset.jsonl";
  if (cache.empty()) cache = work_dir / "cache";
  if (choices.empty()) choices = work_dir / "choices.jsonl";
  if (models.empty()) models = work_dir / "models";
  if (report.empty()) report = work_dir / "report.json";
  if (plots.empty()) plots = work_dir / "plots";
}

json PipelineConfig::ToJson() const {
  return {{"source", source.string()},
          {"format", format == SourceFormat::kNativeJsonl ? "native_jsonl" : "semeval_xml"},
          {"inventory", inventory ? json(inventory->string()) : json(nullptr)},
          {"work_dir", work_dir.string()},
          {"dataset", dataset.string()},
          {"cache", cache.string()},
          {"choices", choices.string()},
          {"models", models.string()},
          {"report", report.string()},
          {"plots", plots.string()},
          {"encoder", encoder},
          {"max_tokens", max_tokens},
          {"dev_ratio", dev_ratio},
          {"dev_seed", dev_seed},
          {"train", train.ToJson()},
          {"retrain_on_dev", retrain_on_dev},
          {"jobs", jobs}};
}

// ---------------------------------------------------------------------------
// Stages

StatsReport RunIngest(const fs::path& source, SourceFormat format,
                      const std::optional<fs::path>& inventory, const fs::path& out,
                      double dev_ratio, uint64_t dev_seed) {
  Dataset dataset = Ingest(source, format, inventory);
  if (dev_ratio > 0.0 && !dataset.HasSplit(Split::kDev) && dataset.HasSplit(Split::kTrain)) {
    dataset = CarveDev(dataset, dev_ratio, dev_seed);
  }
  SaveDataset(dataset, out);
  return ComputeStats(dataset);
}

std::string ResolveFingerprint(const CacheStore& cache, const std::string& preferred) {
  if (!preferred.empty()) return preferred;
  const auto fps = cache.Fingerprints();
  if (fps.size() == 1) return fps.front();
  if (fps.empty()) {
    throw ValidationError("cache " + cache.root().string() + " is empty; run embed first");
  }
  throw ValidationError("cache holds embeddings from " + std::to_string(fps.size()) +
                        " encoders; pass --fingerprint or --model");
}

void RunSelectLayers(const fs::path& dataset, const fs::path& cache_dir,
                     const std::string& fingerprint, const fs::path& out,
                     const SweepOptions& options) {
  const Dataset data = LoadDataset(dataset);
  const CacheStore cache(cache_dir);
  const std::string fp = ResolveFingerprint(cache, fingerprint);
  WriteChoices(SelectAllLayers(data, cache, fp, options), out);
}

void RunTrain(const fs::path& dataset, const fs::path& cache_dir, const fs::path& choices,
              const fs::path& out, const SweepOptions& options) {
  const Dataset data = LoadDataset(dataset);
  const CacheStore cache(cache_dir);
  const auto parsed = ReadChoices(choices);
  for (const auto& c : parsed) {
    if (c.seed != options.config.seed) {
      std::cerr << "warning: layer for \"" << c.preposition << "\" was selected with seed "
                << c.seed << ", training with seed " << options.config.seed << '\n';
    }
  }
  const auto models = TrainAllModels(data, cache, parsed, options);
  if (fs::exists(out)) {
    for (const auto& e : fs::directory_iterator(out)) {
      if (e.path().extension() == ".ckpt") fs::remove(e.path());
    }
  }
  SaveModels(models, out);
}

json RunEvaluate(const fs::path& dataset, const fs::path& cache_dir, const fs::path& models_dir,
                 const fs::path& out) {
  const Dataset data = LoadDataset(dataset);
  const CacheStore cache(cache_dir);
  const auto models = LoadModels(models_dir);
  const EvaluationReport report = Evaluate(models, data, cache);
  const EvaluationReport baseline = BaselineMostFrequent(data);

  json doc = report.ToJson();
  doc["baseline"] = {{"system", "most_frequent_sense"},
                     {"macro_accuracy", baseline.macro_accuracy},
                     {"micro_accuracy", baseline.micro_accuracy}};
  json per_prep = json::object();
  for (const auto& r : baseline.reports) per_prep[r.preposition] = r.accuracy;
  doc["baseline"]["per_preposition"] = per_prep;
  json analyses = json::array();
  for (const auto& r : report.reports) {
    analyses.push_back(
        ErrorAnalysis(r, data.inventory(), TrainingSupport(data, r.preposition)).ToJson());
  }
  doc["analysis"] = analyses;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) throw StageError("cannot write " + out.string());
  f << doc.dump(2) << '\n';
  return doc;
}

std::vector<fs::path> RunReport(const fs::path& report_path, const fs::path& plots) {
  std::ifstream in(report_path);
  if (!in) throw ValidationError("cannot open report " + report_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("bad report " + report_path.string() + ": " + e.what());
  }
  const EvaluationReport report = EvaluationReport::FromJson(doc);
  auto written = WritePlots(report, plots);
  if (doc.contains("analysis")) {
    const fs::path p = plots / "analysis.json";
    std::ofstream(p) << doc["analysis"].dump(2) << '\n';
    written.push_back(p);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Orchestration

std::string ArtifactSignature(const fs::path& path, bool deep) {
  if (!fs::exists(path)) return {};
  if (fs::is_regular_file(path)) return Sha256File(path);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    h.Update(fs::relative(f, path).generic_string());
    h.Update("\n");
    h.Update(deep ? Sha256File(f) : std::to_string(fs::file_size(f)));
    h.Update("\n");
  }
  return h.HexDigest();
}

namespace {

std::string Now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json ReadManifest(const fs::path& path) {
  if (!fs::exists(path)) return json::object();
  try {
    std::ifstream in(path);
    return json::parse(in);
  } catch (const json::exception&) {
    return json::object();
  }
}

void WriteManifest(const fs::path& path, const json& manifest) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  std::ofstream(tmp) << manifest.dump(2) << '\n';
  fs::rename(tmp, path);
}

}  // namespace

std::vector<StageOutcome> RunAll(const PipelineConfig& input) {
  PipelineConfig config = input;
  config.ResolvePaths();
  if (config.source.empty()) throw ValidationError("config lacks `source`");
  if (config.encoder.empty()) throw ValidationError("config lacks `encoder`");
  fs::create_directories(config.work_dir);

  json manifest = ReadManifest(config.manifest());
  manifest["config"] = config.ToJson();
  if (!manifest.contains("stages")) manifest["stages"] = json::object();

  std::vector<StageOutcome> outcomes;
  bool upstream_ran = false;

  // Runs `body` unless the recorded input signature and outputs still match.
  auto stage = [&](const std::string& name, const std::string& inputs,
                   const std::vector<std::pair<fs::path, bool>>& outputs,
                   const std::function<json()>& body) {
    auto output_sig = [&] {
      json o = json::object();
      for (const auto& [path, deep] : outputs) o[path.string()] = ArtifactSignature(path, deep);
      return o;
    };
    const json& rec = manifest["stages"].contains(name) ? manifest["stages"][name] : json();
    const bool outputs_present = std::all_of(outputs.begin(), outputs.end(),
                                             [](const auto& o) { return fs::exists(o.first); });
    const bool fresh = !upstream_ran && outputs_present && rec.is_object() &&
                       rec.value("inputs", std::string()) == inputs &&
                       rec.value("outputs", json()) == output_sig();
    if (fresh) {
      if (config.verbose) std::cerr << "run-all: " << name << " up to date\n";
      outcomes.push_back({name, false});
      return;
    }
    if (config.verbose) std::cerr << "run-all: " << name << "\n";
    json details;
    try {
      details = body();
    } catch (const ValidationError& e) {
      throw ValidationError("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
      throw StageError("stage " + name + ": " + e.what());
    }
    manifest["stages"][name] = {{"inputs", inputs},
                                {"outputs", output_sig()},
                                {"finished", Now()},
                                {"details", details}};
    WriteManifest(config.manifest(), manifest);
    upstream_ran = true;
    outcomes.push_back({name, true});
  };

  auto sig = [](std::initializer_list<std::string> parts) {
    Sha256 h;
    for (const auto& p : parts) {
      h.Update(p);
      h.Update("\x1f");
    }
    return h.HexDigest();
  };

  // ingest
  stage("ingest",
        sig({ArtifactSignature(config.source, true),
             config.inventory ? ArtifactSignature(*config.inventory, true) : "",
             manifest["config"]["format"].get<std::string>(), std::to_string(config.dev_ratio),
             std::to_string(config.dev_seed)}),
        {{config.dataset, true}}, [&] {
          return RunIngest(config.source, config.format, config.inventory, config.dataset,
                           config.dev_ratio, config.dev_seed)
              .ToJson();
        });

  // embed
  std::unique_ptr<Encoder> encoder;
  try {
    encoder = OpenEncoder(config.encoder, {config.max_tokens});
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("stage embed: ") + e.what());
  } catch (const std::exception& e) {
    throw StageError(std::string("stage embed: ") + e.what());
  }
  const std::string fp = encoder->info().fingerprint;
  manifest["encoder"] = {{"model_id", encoder->info().model_id},
                         {"num_layers", encoder->info().num_layers},
                         {"hidden_dim", encoder->info().hidden_dim},
                         {"max_tokens", encoder->info().max_tokens},
                         {"fingerprint", fp}};
  const fs::path cache_part = config.cache / fp;
  stage("embed",
        sig({ArtifactSignature(config.dataset, true), fp,
             std::to_string(encoder->info().max_tokens)}),
        {{cache_part, false}}, [&] {
          CacheStore cache(config.cache);
          const CacheReport r = EncodeCorpus(*encoder, LoadDataset(config.dataset), cache,
                                             config.verbose);
          if (!r.failed.empty()) {
            throw StageError(std::to_string(r.failed.size()) + " instances failed to encode (first " +
                             r.failed.front().first + ": " + r.failed.front().second + ")");
          }
          return r.ToJson();
        });

  SweepOptions sweep{config.train, config.retrain_on_dev, config.jobs, config.verbose};
  const std::string train_cfg = config.train.ToJson().dump();

  stage("select-layers",
        sig({ArtifactSignature(config.dataset, true), ArtifactSignature(cache_part, false), fp,
             train_cfg}),
        {{config.choices, true}}, [&] {
          RunSelectLayers(config.dataset, config.cache, fp, config.choices, sweep);
          return json{{"choices", config.choices.string()}};
        });

  stage("train",
        sig({ArtifactSignature(config.dataset, true), ArtifactSignature(config.choices, true),
             ArtifactSignature(cache_part, false), train_cfg,
             config.retrain_on_dev ? "retrain" : "no-retrain"}),
        {{config.models, true}}, [&] {
          RunTrain(config.dataset, config.cache, config.choices, config.models, sweep);
          for (const auto& [prep, m] : LoadModels(config.models)) {
            if (m.encoder_fingerprint() != fp) {
              throw ValidationError("model for \"" + prep + "\" has a foreign encoder fingerprint");
            }
          }
          return json{{"models", config.models.string()}};
        });

  stage("evaluate",
        sig({ArtifactSignature(config.dataset, true), ArtifactSignature(config.models, true),
             ArtifactSignature(cache_part, false)}),
        {{config.report, true}}, [&] {
          const json doc = RunEvaluate(config.dataset, config.cache, config.models, config.report);
          return json{{"macro_accuracy", doc["macro_accuracy"]},
                      {"micro_accuracy", doc["micro_accuracy"]},
                      {"baseline_macro_accuracy", doc["baseline"]["macro_accuracy"]}};
        });

  stage("report", sig({ArtifactSignature(config.report, true)}), {{config.plots, true}}, [&] {
    const auto files = RunReport(config.report, config.plots);
    return json{{"files", files.size()}};
  });

  manifest["completed"] = Now();
  WriteManifest(config.manifest(), manifest);
  return outcomes;
}

}  // namespace psd
