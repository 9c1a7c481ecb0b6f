#include "psd/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "psd/errors.h"
#include "psd/rng.h"
#include "psd/semeval.h"
#include "psd/text.h"

namespace psd {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw ValidationError("unknown split \"" + std::string(name) + "\"");
}

void LabeledInstance::Validate() const {
  if (id.empty()) throw ValidationError("instance with empty id");
  if (head.start > head.end || head.end >= tokens.size()) {
    throw ValidationError("instance " + id + ": head span [" +
                          std::to_string(head.start) + ", " +
                          std::to_string(head.end) + "] outside " +
                          std::to_string(tokens.size()) + " tokens");
  }
  const std::string head_text = JoinLower(tokens, head.start, head.end);
  if (head_text != Lowercase(NormalizeSpace(preposition))) {
    throw ValidationError("instance " + id + ": head text \"" + head_text +
                          "\" does not match preposition \"" + preposition +
                          "\"");
  }
  if (split.has_value() && !sense.has_value()) {
    throw ValidationError("instance " + id + ": " +
                          std::string(SplitName(*split)) +
                          " instance without a gold sense");
  }
}

// ---------------------------------------------------------------------------
// SenseInventory

void SenseInventory::Add(const std::string& preposition, SenseEntry entry) {
  auto& list = senses_[preposition];
  for (const auto& e : list) {
    if (e.id == entry.id) {
      throw ValidationError("duplicate sense " + entry.id.raw() + " for \"" +
                            preposition + "\" in inventory");
    }
  }
  list.push_back(std::move(entry));
}

bool SenseInventory::Contains(const std::string& preposition,
                              const SenseId& sense) const {
  const auto it = senses_.find(preposition);
  if (it == senses_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const SenseEntry& e) { return e.id == sense; });
}

const std::vector<SenseEntry>& SenseInventory::Senses(
    const std::string& preposition) const {
  static const std::vector<SenseEntry> kEmpty;
  const auto it = senses_.find(preposition);
  return it == senses_.end() ? kEmpty : it->second;
}

std::vector<std::string> SenseInventory::Prepositions() const {
  std::vector<std::string> out;
  out.reserve(senses_.size());
  for (const auto& [prep, _] : senses_) out.push_back(prep);
  return out;
}

size_t SenseInventory::TotalSenses() const {
  size_t n = 0;
  for (const auto& [_, list] : senses_) n += list.size();
  return n;
}

bool operator==(const SenseInventory& a, const SenseInventory& b) {
  if (a.inferred_ != b.inferred_ || a.senses_.size() != b.senses_.size()) {
    return false;
  }
  for (const auto& [prep, list] : a.senses_) {
    const auto it = b.senses_.find(prep);
    if (it == b.senses_.end() || it->second.size() != list.size()) return false;
    for (size_t i = 0; i < list.size(); ++i) {
      if (!(list[i].id == it->second[i].id) ||
          list[i].gloss != it->second[i].gloss) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<LabeledInstance> instances,
                 SenseInventory inventory)
    : instances_(std::move(instances)), inventory_(std::move(inventory)) {
  std::unordered_set<std::string> ids;
  for (const auto& inst : instances_) {
    inst.Validate();
    if (!ids.insert(inst.id).second) {
      throw ValidationError("duplicate instance id " + inst.id);
    }
    if (inst.sense && !inventory_.Contains(inst.preposition, *inst.sense)) {
      throw ValidationError("instance " + inst.id + ": gold sense " +
                            inst.sense->raw() + " not in inventory for \"" +
                            inst.preposition + "\"");
    }
  }
}

std::vector<std::string> Dataset::Prepositions() const {
  std::set<std::string> preps;
  for (const auto& inst : instances_) preps.insert(inst.preposition);
  return {preps.begin(), preps.end()};
}

std::vector<const LabeledInstance*> Dataset::Select(
    const std::string& preposition, Split split) const {
  std::vector<const LabeledInstance*> out;
  for (const auto& inst : instances_) {
    if (inst.preposition == preposition && inst.split == split) {
      out.push_back(&inst);
    }
  }
  return out;
}

bool Dataset::HasSplit(Split split) const {
  return std::any_of(instances_.begin(), instances_.end(),
                     [&](const LabeledInstance& i) { return i.split == split; });
}

// ---------------------------------------------------------------------------
// Native JSONL

json InstanceToJson(const LabeledInstance& instance) {
  json j;
  j["id"] = instance.id;
  j["tokens"] = instance.tokens;
  j["head"] = {instance.head.start, instance.head.end};
  j["prep"] = instance.preposition;
  j["sense"] = instance.sense ? json(instance.sense->raw()) : json(nullptr);
  j["split"] = instance.split ? json(std::string(SplitName(*instance.split)))
                              : json(nullptr);
  return j;
}

LabeledInstance InstanceFromJson(const json& record) {
  LabeledInstance inst;
  try {
    inst.id = record.at("id").get<std::string>();
    inst.tokens = record.at("tokens").get<std::vector<std::string>>();
    const auto& head = record.at("head");
    if (!head.is_array() || head.size() != 2) {
      throw ValidationError("instance " + inst.id +
                            ": head marker must be [start, end]");
    }
    inst.head = {head[0].get<size_t>(), head[1].get<size_t>()};
    inst.preposition = record.at("prep").get<std::string>();
    if (record.contains("sense") && !record["sense"].is_null()) {
      inst.sense = SenseId::Parse(record["sense"].get<std::string>());
    }
    if (record.contains("split") && !record["split"].is_null()) {
      inst.split = ParseSplit(record["split"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ValidationError("bad instance record" +
                          (inst.id.empty() ? std::string() : " " + inst.id) +
                          ": " + e.what());
  }
  return inst;
}

namespace {

struct JsonLine {
  size_t line;
  json value;
};

std::vector<JsonLine> ReadJsonLines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<JsonLine> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (NormalizeSpace(line).empty()) continue;
    try {
      out.push_back({lineno, json::parse(line)});
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": " + e.what());
    }
  }
  return out;
}

std::vector<fs::path> ListFiles(const fs::path& dir,
                                std::string_view extension) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<LabeledInstance> ReadNative(const fs::path& source) {
  std::vector<fs::path> files;
  if (fs::is_directory(source)) {
    files = ListFiles(source, ".jsonl");
    std::erase_if(files, [](const fs::path& p) {
      return p.filename().string().ends_with(".inventory.jsonl");
    });
  } else {
    files.push_back(source);
  }
  if (files.empty()) {
    throw ValidationError("no .jsonl files under " + source.string());
  }
  std::vector<LabeledInstance> out;
  for (const auto& file : files) {
    for (const auto& [line, record] : ReadJsonLines(file)) {
      try {
        out.push_back(InstanceFromJson(record));
      } catch (const ValidationError& e) {
        throw ValidationError(file.string() + ":" + std::to_string(line) +
                              ": " + e.what());
      }
    }
  }
  return out;
}

}  // namespace

SourceFormat ParseSourceFormat(std::string_view name) {
  if (name == "native_jsonl" || name == "jsonl") return SourceFormat::kNativeJsonl;
  if (name == "semeval_xml" || name == "semeval") return SourceFormat::kSemevalXml;
  throw ValidationError("unknown source format \"" + std::string(name) + "\"");
}

Dataset Ingest(const fs::path& source, SourceFormat format,
               const std::optional<fs::path>& inventory_path) {
  if (!fs::exists(source)) {
    throw ValidationError("input " + source.string() + " does not exist");
  }
  std::vector<LabeledInstance> instances =
      format == SourceFormat::kNativeJsonl ? ReadNative(source)
                                           : ReadSemevalDirectory(source);
  if (instances.empty()) {
    throw ValidationError("no instances found under " + source.string());
  }
  SenseInventory inventory = inventory_path ? LoadInventory(*inventory_path)
                                            : InferInventory(instances);
  return Dataset(std::move(instances), std::move(inventory));
}

SenseInventory LoadInventory(const fs::path& path) {
  SenseInventory inventory;
  bool any_inferred = false;
  for (const auto& [line, record] : ReadJsonLines(path)) {
    try {
      const auto prep = record.at("prep").get<std::string>();
      for (const auto& s : record.at("senses")) {
        SenseEntry entry{SenseId::Parse(s.at("id").get<std::string>()),
                         std::nullopt};
        if (s.contains("gloss") && !s["gloss"].is_null()) {
          entry.gloss = s["gloss"].get<std::string>();
        }
        inventory.Add(prep, std::move(entry));
      }
      any_inferred = any_inferred || record.value("inferred", false);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line) +
                            ": bad inventory record: " + e.what());
    }
  }
  inventory.set_inferred(any_inferred);
  return inventory;
}

SenseInventory InferInventory(const std::vector<LabeledInstance>& instances) {
  std::map<std::string, std::set<SenseId>> seen;
  for (const auto& inst : instances) {
    if (inst.sense) seen[inst.preposition].insert(*inst.sense);
  }
  SenseInventory inventory;
  for (const auto& [prep, senses] : seen) {
    for (const auto& s : senses) inventory.Add(prep, {s, std::nullopt});
  }
  inventory.set_inferred(true);
  return inventory;
}

void WriteInventory(const SenseInventory& inventory, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw StageError("cannot write " + path.string());
  for (const auto& prep : inventory.Prepositions()) {
    json senses = json::array();
    for (const auto& e : inventory.Senses(prep)) {
      senses.push_back({{"id", e.id.raw()},
                        {"gloss", e.gloss ? json(*e.gloss) : json(nullptr)}});
    }
    json record = {{"prep", prep}, {"senses", senses}};
    if (inventory.inferred()) record["inferred"] = true;
    out << record.dump() << '\n';
  }
}

fs::path InventoryPathFor(const fs::path& dataset) {
  fs::path p = dataset;
  p.replace_extension(".inventory.jsonl");
  return p;
}

void SaveDataset(const Dataset& dataset, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw StageError("cannot write " + path.string());
  for (const auto& inst : dataset.instances()) {
    out << InstanceToJson(inst).dump() << '\n';
  }
  WriteInventory(dataset.inventory(), InventoryPathFor(path));
}

Dataset LoadDataset(const fs::path& path) {
  const fs::path inv = InventoryPathFor(path);
  return Ingest(path, SourceFormat::kNativeJsonl,
                fs::exists(inv) ? std::optional<fs::path>(inv) : std::nullopt);
}

// ---------------------------------------------------------------------------
// Dev carving

Dataset CarveDev(const Dataset& dataset, double ratio, uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("dev ratio must lie in (0, 1)");
  }
  if (!dataset.HasSplit(Split::kTrain)) {
    throw ValidationError("dataset has no train split to carve dev from");
  }
  // Strata keyed by (preposition, sense) in sorted order; members listed in
  // dataset order, so the result depends only on the data and the seed.
  std::map<std::pair<std::string, SenseId>, std::vector<size_t>> strata;
  const auto& instances = dataset.instances();
  for (size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.split == Split::kTrain) {
      strata[{inst.preposition, *inst.sense}].push_back(i);
    }
  }
  std::vector<LabeledInstance> out = instances;
  Rng rng(seed);
  for (auto& [key, members] : strata) {
    const size_t n = members.size();
    if (n < 2) continue;
    const auto wanted = static_cast<size_t>(std::llround(ratio * n));
    const size_t take = std::min(wanted, n - 1);
    rng.Shuffle(std::span<size_t>(members));
    for (size_t k = 0; k < take; ++k) out[members[k]].split = Split::kDev;
  }
  return Dataset(std::move(out), dataset.inventory());
}

// ---------------------------------------------------------------------------
// Statistics

StatsReport ComputeStats(const Dataset& dataset) {
  StatsReport report;
  const auto& inventory = dataset.inventory();
  report.inventory_inferred = inventory.inferred();
  report.total_instances = dataset.size();

  std::map<std::string, std::map<SenseId, size_t>> sense_counts;
  std::map<std::string, PrepositionStats> per;
  for (const auto& inst : dataset.instances()) {
    auto& ps = per[inst.preposition];
    ps.preposition = inst.preposition;
    ++ps.instances;
    if (inst.split == Split::kTrain) ++ps.train;
    if (inst.split == Split::kDev) ++ps.dev;
    if (inst.split == Split::kTest) ++ps.test;
    if (inst.sense) ++sense_counts[inst.preposition][*inst.sense];
  }
  for (const auto& prep : inventory.Prepositions()) {
    per[prep].preposition = prep;
  }
  for (auto& [prep, ps] : per) {
    const auto& counts = sense_counts[prep];
    ps.attested_senses = counts.size();
    ps.inventory_senses = inventory.Senses(prep).size();
    size_t labeled = 0;
    size_t top = 0;
    for (const auto& [_, c] : counts) {
      labeled += c;
      top = std::max(top, c);
    }
    ps.most_frequent_sense_share =
        labeled == 0 ? 0.0 : static_cast<double>(top) / labeled;
    for (const auto& e : inventory.Senses(prep)) {
      if (!counts.contains(e.id)) report.zero_data_senses.emplace_back(prep, e.id);
    }
    if (ps.instances > 0) ++report.prepositions;
    report.attested_senses += ps.attested_senses;
    report.per_preposition.push_back(ps);
  }
  report.inventory_senses = inventory.TotalSenses();
  return report;
}

json StatsReport::ToJson() const {
  json preps = json::array();
  for (const auto& p : per_preposition) {
    preps.push_back({{"prep", p.preposition},
                     {"instances", p.instances},
                     {"train", p.train},
                     {"dev", p.dev},
                     {"test", p.test},
                     {"attested_senses", p.attested_senses},
                     {"inventory_senses", p.inventory_senses},
                     {"most_frequent_sense_share", p.most_frequent_sense_share}});
  }
  json zero = json::array();
  for (const auto& [prep, sense] : zero_data_senses) {
    zero.push_back({{"prep", prep}, {"sense", sense.raw()}});
  }
  return {{"total_instances", total_instances},
          {"prepositions", prepositions},
          {"inventory_senses", inventory_senses},
          {"attested_senses", attested_senses},
          {"inventory_inferred", inventory_inferred},
          {"per_preposition", preps},
          {"zero_data_senses", zero}};
}

}  // namespace psd
