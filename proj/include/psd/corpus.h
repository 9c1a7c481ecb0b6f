#ifndef PSD_CORPUS_H_
#define PSD_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "psd/sense_id.h"

namespace psd {

enum class Split { kTrain, kDev, kTest };

std::string_view SplitName(Split split);
// Throws ValidationError for anything other than "train", "dev", "test".
Split ParseSplit(std::string_view name);

// Inclusive token index range of the preposition occurrence.
struct HeadSpan {
  size_t start = 0;
  size_t end = 0;

  size_t size() const { return end - start + 1; }
  bool Contains(size_t i) const { return i >= start && i <= end; }
  friend bool operator==(const HeadSpan&, const HeadSpan&) = default;
};

// One sentence with a marked preposition occurrence. Unlabeled instances
// (no sense, no split) are produced by the tagger.
struct LabeledInstance {
  std::string id;
  std::vector<std::string> tokens;
  HeadSpan head;
  std::string preposition;
  std::optional<SenseId> sense;
  std::optional<Split> split;

  // Throws ValidationError when the head is out of bounds, the head text does
  // not spell the preposition, or a split is set without a sense.
  void Validate() const;
};

struct SenseEntry {
  SenseId id;
  std::optional<std::string> gloss;
};

// Preposition lemma -> ordered, duplicate-free sense list.
class SenseInventory {
 public:
  SenseInventory() = default;

  // Throws ValidationError on a duplicate sense for the same preposition.
  void Add(const std::string& preposition, SenseEntry entry);

  bool Contains(const std::string& preposition, const SenseId& sense) const;
  bool HasPreposition(const std::string& preposition) const {
    return senses_.contains(preposition);
  }
  // Empty list for unknown prepositions.
  const std::vector<SenseEntry>& Senses(const std::string& preposition) const;
  std::vector<std::string> Prepositions() const;
  size_t TotalSenses() const;

  // True when built from gold labels rather than an inventory file.
  bool inferred() const { return inferred_; }
  void set_inferred(bool inferred) { inferred_ = inferred; }

  friend bool operator==(const SenseInventory& a, const SenseInventory& b);

 private:
  std::map<std::string, std::vector<SenseEntry>> senses_;
  bool inferred_ = false;
};

// Validated, immutable collection of instances plus their inventory.
class Dataset {
 public:
  Dataset() = default;
  // Validates every instance, id uniqueness and inventory membership of gold
  // senses. Throws ValidationError on the first violation.
  Dataset(std::vector<LabeledInstance> instances, SenseInventory inventory);

  const std::vector<LabeledInstance>& instances() const { return instances_; }
  const SenseInventory& inventory() const { return inventory_; }
  size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }

  // Sorted preposition lemmas that occur in the instances.
  std::vector<std::string> Prepositions() const;
  // Instances of one preposition in one split, in dataset order.
  std::vector<const LabeledInstance*> Select(const std::string& preposition,
                                            Split split) const;
  bool HasSplit(Split split) const;

 private:
  std::vector<LabeledInstance> instances_;
  SenseInventory inventory_;
};

enum class SourceFormat { kNativeJsonl, kSemevalXml };
SourceFormat ParseSourceFormat(std::string_view name);

// Loads a dataset. `source` is a file or a directory whose per-preposition
// files are merged in path order. When `inventory_path` is absent the
// inventory is inferred from the gold labels and flagged as such.
Dataset Ingest(const std::filesystem::path& source, SourceFormat format,
               const std::optional<std::filesystem::path>& inventory_path =
                   std::nullopt);

// JSON record conversion for the native line format.
nlohmann::json InstanceToJson(const LabeledInstance& instance);
LabeledInstance InstanceFromJson(const nlohmann::json& record);

SenseInventory LoadInventory(const std::filesystem::path& path);
SenseInventory InferInventory(const std::vector<LabeledInstance>& instances);
void WriteInventory(const SenseInventory& inventory,
                    const std::filesystem::path& path);

// Sidecar inventory path written next to a dataset file:
// "dataset.jsonl" -> "dataset.inventory.jsonl".
std::filesystem::path InventoryPathFor(const std::filesystem::path& dataset);

// Writes instances as native JSONL and the inventory to its sidecar file.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& path);
// Reads a dataset written by SaveDataset; infers the inventory if the
// sidecar is missing.
Dataset LoadDataset(const std::filesystem::path& path);

// Relabels a per-(preposition, sense) stratified fraction of the train split
// as dev. Strata with one instance stay in train. Deterministic in `seed`.
Dataset CarveDev(const Dataset& dataset, double ratio, uint64_t seed);

inline constexpr double kDefaultDevRatio = 0.2;
inline constexpr uint64_t kDefaultDevSeed = 13;

struct PrepositionStats {
  std::string preposition;
  size_t instances = 0;
  size_t train = 0;
  size_t dev = 0;
  size_t test = 0;
  size_t attested_senses = 0;
  size_t inventory_senses = 0;
  double most_frequent_sense_share = 0.0;
};

struct StatsReport {
  size_t total_instances = 0;
  size_t prepositions = 0;
  size_t inventory_senses = 0;
  size_t attested_senses = 0;
  bool inventory_inferred = false;
  std::vector<PrepositionStats> per_preposition;
  std::vector<std::pair<std::string, SenseId>> zero_data_senses;

  nlohmann::json ToJson() const;
};

StatsReport ComputeStats(const Dataset& dataset);

}  // namespace psd

#endif  // PSD_CORPUS_H_
