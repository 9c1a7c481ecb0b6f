#ifndef PSD_EVALUATION_H_
#define PSD_EVALUATION_H_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "psd/cache.h"
#include "psd/classifier.h"
#include "psd/corpus.h"

namespace psd {

struct PrepositionReport {
  std::string preposition;
  size_t n_test = 0;
  size_t n_correct = 0;
  double accuracy = 0.0;
  // (gold, predicted) -> count; sums to n_test.
  std::map<std::pair<SenseId, SenseId>, size_t> confusion;
  std::map<SenseId, size_t> per_sense_support;
  // Test items whose gold sense is outside the model's label map.
  size_t unpredictable = 0;
  int chosen_layer = -1;
  std::vector<double> layer_accuracy;
};

struct EvaluationReport {
  std::vector<PrepositionReport> reports;
  double macro_accuracy = 0.0;
  double micro_accuracy = 0.0;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json ToJson() const;
  static EvaluationReport FromJson(const nlohmann::json& j);
  const PrepositionReport* Find(const std::string& preposition) const;
};

// Fills accuracy and aggregates from the confusion counts.
void FinalizeReport(PrepositionReport& report);
void FinalizeAggregates(EvaluationReport& report);

// Scores every test instance with its preposition's model at the model's
// chosen layer. Throws ValidationError when a test preposition has no model
// or the cache only holds embeddings from a different encoder.
EvaluationReport Evaluate(const std::map<std::string, ClassifierModel>& models,
                          const Dataset& dataset, const CacheStore& cache);

// Predicts each preposition's most frequent train+dev sense (lowest sense on
// ties) for every test instance.
EvaluationReport BaselineMostFrequent(const Dataset& dataset);

// Train+dev instance counts per sense of one preposition.
std::map<SenseId, size_t> TrainingSupport(const Dataset& dataset,
                                          const std::string& preposition);

struct AnalysisOptions {
  // A confusion gold -> predicted counts as absorption when the predicted
  // sense has at least this many times the gold sense's training support...
  double absorption_support_ratio = 10.0;
  // ...and takes at least this share of the gold sense's test items.
  double absorption_share = 0.5;
  // Confusions between senses of comparable support taking at least this
  // share of the gold sense's test items are flagged as near-synonymous.
  double near_synonym_share = 0.25;
};

struct ConfusionPair {
  SenseId gold;
  SenseId predicted;
  size_t count = 0;
  size_t gold_support = 0;
  size_t predicted_support = 0;
  bool absorption = false;
  bool near_synonym = false;
};

struct SenseRow {
  SenseId sense;
  size_t train_support = 0;
  size_t test_support = 0;
  size_t correct = 0;
  double accuracy = 0.0;
  std::optional<std::string> gloss;
};

struct AnalysisSummary {
  std::string preposition;
  std::vector<ConfusionPair> ranked;  // off-diagonal, by count descending
  std::vector<SenseRow> senses;       // every inventory or test sense

  nlohmann::json ToJson() const;
};

AnalysisSummary ErrorAnalysis(const PrepositionReport& report,
                              const SenseInventory& inventory,
                              const std::map<SenseId, size_t>& train_support,
                              const AnalysisOptions& options = {});

}  // namespace psd

#endif  // PSD_EVALUATION_H_
