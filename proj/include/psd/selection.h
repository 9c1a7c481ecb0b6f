#ifndef PSD_SELECTION_H_
#define PSD_SELECTION_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "psd/cache.h"
#include "psd/classifier.h"
#include "psd/corpus.h"

namespace psd {

// Outcome of the per-preposition layer sweep.
struct LayerChoice {
  std::string preposition;
  int chosen_layer = 0;
  // One dev accuracy per layer 0..H; empty when the preposition had no dev
  // data and the last layer was taken by convention.
  std::vector<double> dev_accuracy_per_layer;
  uint64_t seed = 0;
  // Best-dev-loss epoch of the run at the chosen layer; the train+dev
  // retrain runs for this many epochs.
  int best_epoch = 0;
  int num_layers = 0;  // H
  std::string encoder_fingerprint;

  nlohmann::json ToJson() const;
  static LayerChoice FromJson(const nlohmann::json& j);
};

// Cached representations of a set of instances.
struct LayerFeatures {
  std::vector<LayerMatrix> matrices;
  std::vector<SenseId> labels;

  // rows = instances, columns = d, taken from `layer` of every matrix.
  RowMatrixF AtLayer(int layer) const;
  size_t size() const { return matrices.size(); }
};

// Pulls cached matrices for `instances`. Throws StageError naming the missing
// entries when the cache is incomplete.
LayerFeatures LoadFeatures(const std::vector<const LabeledInstance*>& instances,
                           const CacheStore& cache, const std::string& fingerprint);

// Trains a fresh classifier per layer on `train`, scores each on `dev`, and
// picks the most accurate layer (lowest index on ties). Without dev data it
// takes the last layer.
LayerChoice SelectLayer(const std::string& preposition, const LayerFeatures& train,
                        const LayerFeatures& dev, const TrainConfig& config);

// Trains the model shipped for `choice`. With `retrain_on_dev` the model is
// refit on train + dev for `choice.best_epoch` epochs; otherwise it is the
// early-stopped train-only model at the chosen layer.
ClassifierModel TrainFinalModel(const LayerChoice& choice, const LayerFeatures& train,
                                const LayerFeatures& dev, const TrainConfig& config,
                                bool retrain_on_dev);

// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. The first exception
// is rethrown after all workers finish.
void ParallelFor(size_t n, int jobs, const std::function<void(size_t)>& fn);

struct SweepOptions {
  TrainConfig config;
  bool retrain_on_dev = true;
  int jobs = 1;
  bool verbose = false;
};

// Layer selection for every preposition with train data.
std::vector<LayerChoice> SelectAllLayers(const Dataset& dataset, const CacheStore& cache,
                                         const std::string& fingerprint,
                                         const SweepOptions& options);

// Final models for every choice.
std::map<std::string, ClassifierModel> TrainAllModels(
    const Dataset& dataset, const CacheStore& cache,
    const std::vector<LayerChoice>& choices, const SweepOptions& options);

void WriteChoices(const std::vector<LayerChoice>& choices,
                  const std::filesystem::path& path);
std::vector<LayerChoice> ReadChoices(const std::filesystem::path& path);

}  // namespace psd

#endif  // PSD_SELECTION_H_
