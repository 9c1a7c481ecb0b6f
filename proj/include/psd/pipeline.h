#ifndef PSD_PIPELINE_H_
#define PSD_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psd/cache.h"
#include "psd/classifier.h"
#include "psd/corpus.h"
#include "psd/selection.h"

namespace psd {

// Flat key-value run configuration. File syntax: `key = value` per line,
// '#' starts a comment. Paths left empty default to files under work_dir.
struct PipelineConfig {
  std::filesystem::path source;
  SourceFormat format = SourceFormat::kNativeJsonl;
  std::optional<std::filesystem::path> inventory;
  std::filesystem::path work_dir = "psd-work";
  std::filesystem::path dataset;
  std::filesystem::path cache;
  std::filesystem::path choices;
  std::filesystem::path models;
  std::filesystem::path report;
  std::filesystem::path plots;
  std::string encoder;
  int max_tokens = 0;
  double dev_ratio = kDefaultDevRatio;
  uint64_t dev_seed = kDefaultDevSeed;
  TrainConfig train;
  bool retrain_on_dev = true;
  int jobs = 1;
  bool verbose = false;

  // Applies `key = value` pairs; unknown keys are a ValidationError.
  void Apply(const std::map<std::string, std::string>& values);
  static std::map<std::string, std::string> ReadKeyValues(
      const std::filesystem::path& path);
  static PipelineConfig FromFile(const std::filesystem::path& path);

  // Fills empty paths from work_dir.
  void ResolvePaths();
  std::filesystem::path manifest() const { return work_dir / "manifest.json"; }
  nlohmann::json ToJson() const;
};

// ---- Individual stages (shared by the CLI subcommands and RunAll). ----

// Ingests, carves a dev split when the data has none and `dev_ratio` > 0,
// and writes the native dataset plus its inventory sidecar.
StatsReport RunIngest(const std::filesystem::path& source, SourceFormat format,
                      const std::optional<std::filesystem::path>& inventory,
                      const std::filesystem::path& out, double dev_ratio,
                      uint64_t dev_seed);

// The fingerprint to use with a cache: `preferred` when given, otherwise
// the single fingerprint present. Throws ValidationError if ambiguous.
std::string ResolveFingerprint(const CacheStore& cache, const std::string& preferred);

void RunSelectLayers(const std::filesystem::path& dataset, const std::filesystem::path& cache,
                     const std::string& fingerprint, const std::filesystem::path& out,
                     const SweepOptions& options);

void RunTrain(const std::filesystem::path& dataset, const std::filesystem::path& cache,
              const std::filesystem::path& choices, const std::filesystem::path& out,
              const SweepOptions& options);

// Scores the models, adds the most-frequent-sense baseline and per-preposition
// error analyses, and writes the report JSON. Returns the written document.
nlohmann::json RunEvaluate(const std::filesystem::path& dataset,
                           const std::filesystem::path& cache,
                           const std::filesystem::path& models,
                           const std::filesystem::path& out);

// Renders plots (and a copy of the analyses) from a report file.
std::vector<std::filesystem::path> RunReport(const std::filesystem::path& report,
                                             const std::filesystem::path& plots);

// ---- Orchestration ----

// Signature of a file (content hash) or directory (hash over relative paths
// and sizes; with `deep`, over contents too). Empty when the path is absent.
std::string ArtifactSignature(const std::filesystem::path& path, bool deep);

struct StageOutcome {
  std::string stage;
  bool executed = false;
};

// Runs ingest, embed, select-layers, train, evaluate and report in order.
// A stage is skipped when the manifest shows the same input signature and
// its outputs are unchanged, and no upstream stage ran in this invocation.
// The manifest is rewritten after every stage. Throws StageError naming the
// failing stage.
std::vector<StageOutcome> RunAll(const PipelineConfig& config);

}  // namespace psd

#endif  // PSD_PIPELINE_H_
