#ifndef PSD_CLASSIFIER_H_
#define PSD_CLASSIFIER_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psd/mlp.h"
#include "psd/sense_id.h"
#include "psd/transformer.h"

namespace psd {

struct TrainConfig {
  int hidden_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  uint64_t seed = 13;

  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
  void Validate() const;
};

// Per-epoch losses of one training run.
struct TrainingLog {
  std::vector<double> train_loss;
  std::vector<double> dev_loss;  // empty when no usable dev data
  int best_epoch = 0;            // 1-based epoch whose parameters were kept
};

// Trained per-preposition classifier. Immutable once built.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(std::string preposition, MlpParams params,
                  std::vector<SenseId> label_map, TrainConfig config);

  const std::string& preposition() const { return preposition_; }
  const MlpParams& params() const { return params_; }
  const std::vector<SenseId>& label_map() const { return label_map_; }
  const TrainConfig& train_config() const { return config_; }
  int input_dim() const { return params_.input_dim(); }

  int chosen_layer() const { return chosen_layer_; }
  void set_chosen_layer(int layer) { chosen_layer_ = layer; }
  const std::string& encoder_fingerprint() const { return fingerprint_; }
  void set_encoder_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }
  // Dev accuracy of every swept layer, kept for reporting.
  const std::vector<double>& layer_accuracy() const { return layer_accuracy_; }
  void set_layer_accuracy(std::vector<double> acc) { layer_accuracy_ = std::move(acc); }

  // Single-sense model that never consulted the data.
  bool is_constant() const { return label_map_.size() == 1; }

  VectorF Probabilities(const VectorF& v) const;
  // Argmax over the label map; ties go to the lowest index.
  size_t PredictIndex(const VectorF& v) const;
  const SenseId& Predict(const VectorF& v) const;
  // Row-wise predictions for a batch.
  std::vector<size_t> PredictBatch(const RowMatrixF& x) const;

  // Index of `sense` in the label map, if present.
  std::optional<size_t> IndexOf(const SenseId& sense) const;

 private:
  std::string preposition_;
  MlpParams params_;
  std::vector<SenseId> label_map_;
  TrainConfig config_;
  int chosen_layer_ = -1;
  std::string fingerprint_;
  std::vector<double> layer_accuracy_;
};

// Trains an MLP with mini-batch Adam on cross-entropy. With non-empty dev
// data, stops after `patience` epochs without a dev-loss improvement and
// returns the best-dev-loss parameters; without dev data it runs
// `max_epochs` epochs and returns the final parameters. The label map is the
// sorted set of training senses; a single-sense preposition yields a constant
// model without optimization. Dev items whose sense is not in the label map
// are ignored for the loss. Throws StageError if the loss becomes non-finite.
ClassifierModel TrainClassifier(const std::string& preposition,
                                const RowMatrixF& train_x,
                                const std::vector<SenseId>& train_y,
                                const RowMatrixF& dev_x,
                                const std::vector<SenseId>& dev_y,
                                const TrainConfig& config,
                                TrainingLog* log = nullptr);

// Fraction of rows whose prediction equals the gold sense.
double Accuracy(const ClassifierModel& model, const RowMatrixF& x,
                const std::vector<SenseId>& y);

// Checkpoint: "PSDC", u32 version, u64 header length, JSON header
// (preposition, label_map, chosen_layer, encoder_fingerprint, d, hidden_size,
// train_config, seed, layer_accuracy) and then W1, b1, W2, b2 as row-major
// little-endian f32.
void SaveCheckpoint(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel LoadCheckpoint(const std::filesystem::path& path);

// One checkpoint per preposition inside `dir`.
std::filesystem::path CheckpointPath(const std::filesystem::path& dir,
                                     const std::string& preposition);
void SaveModels(const std::map<std::string, ClassifierModel>& models,
                const std::filesystem::path& dir);
std::map<std::string, ClassifierModel> LoadModels(const std::filesystem::path& dir);

}  // namespace psd

#endif  // PSD_CLASSIFIER_H_
