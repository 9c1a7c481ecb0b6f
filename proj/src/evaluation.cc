#include "psd/evaluation.h"

#include <algorithm>
#include <set>

#include "psd/errors.h"
#include "psd/selection.h"

namespace psd {

using nlohmann::json;

void FinalizeReport(PrepositionReport& r) {
  r.n_test = 0;
  r.n_correct = 0;
  r.per_sense_support.clear();
  for (const auto& [key, count] : r.confusion) {
    r.n_test += count;
    r.per_sense_support[key.first] += count;
    if (key.first == key.second) r.n_correct += count;
  }
  r.accuracy = r.n_test == 0 ? 0.0
                             : static_cast<double>(r.n_correct) / static_cast<double>(r.n_test);
}

void FinalizeAggregates(EvaluationReport& report) {
  double acc_sum = 0.0;
  size_t preps = 0;
  size_t correct = 0;
  size_t total = 0;
  for (const auto& r : report.reports) {
    if (r.n_test == 0) continue;
    acc_sum += r.accuracy;
    ++preps;
    correct += r.n_correct;
    total += r.n_test;
  }
  report.macro_accuracy = preps == 0 ? 0.0 : acc_sum / static_cast<double>(preps);
  report.micro_accuracy =
      total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

const PrepositionReport* EvaluationReport::Find(const std::string& preposition) const {
  for (const auto& r : reports) {
    if (r.preposition == preposition) return &r;
  }
  return nullptr;
}

json EvaluationReport::ToJson() const {
  json preps = json::array();
  for (const auto& r : reports) {
    json confusion = json::array();
    for (const auto& [key, count] : r.confusion) {
      confusion.push_back({{"gold", key.first.raw()},
                           {"predicted", key.second.raw()},
                           {"count", count}});
    }
    json support = json::object();
    for (const auto& [sense, count] : r.per_sense_support) support[sense.raw()] = count;
    preps.push_back({{"prep", r.preposition},
                     {"n_test", r.n_test},
                     {"n_correct", r.n_correct},
                     {"accuracy", r.accuracy},
                     {"unpredictable", r.unpredictable},
                     {"chosen_layer", r.chosen_layer},
                     {"layer_accuracy", r.layer_accuracy},
                     {"per_sense_support", support},
                     {"confusion", confusion}});
  }
  return {{"macro_accuracy", macro_accuracy},
          {"micro_accuracy", micro_accuracy},
          {"metadata", metadata},
          {"prepositions", preps}};
}

EvaluationReport EvaluationReport::FromJson(const json& j) {
  EvaluationReport report;
  try {
    report.metadata = j.value("metadata", json::object());
    for (const auto& p : j.at("prepositions")) {
      PrepositionReport r;
      r.preposition = p.at("prep").get<std::string>();
      r.unpredictable = p.value("unpredictable", size_t{0});
      r.chosen_layer = p.value("chosen_layer", -1);
      r.layer_accuracy = p.value("layer_accuracy", std::vector<double>{});
      for (const auto& c : p.at("confusion")) {
        r.confusion[{SenseId::Parse(c.at("gold").get<std::string>()),
                     SenseId::Parse(c.at("predicted").get<std::string>())}] +=
            c.at("count").get<size_t>();
      }
      FinalizeReport(r);
      report.reports.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad evaluation report: ") + e.what());
  }
  FinalizeAggregates(report);
  return report;
}

EvaluationReport Evaluate(const std::map<std::string, ClassifierModel>& models,
                          const Dataset& dataset, const CacheStore& cache) {
  EvaluationReport report;
  std::vector<std::string> missing;
  for (const auto& prep : dataset.Prepositions()) {
    if (!dataset.Select(prep, Split::kTest).empty() && !models.contains(prep)) {
      missing.push_back(prep);
    }
  }
  if (!missing.empty()) {
    throw ValidationError("no trained model for test preposition \"" + missing.front() +
                          "\" (" + std::to_string(missing.size()) + " missing)");
  }
  std::set<std::string> fingerprints;
  json layers = json::object();
  json seeds = json::object();
  for (const auto& prep : dataset.Prepositions()) {
    const auto test = dataset.Select(prep, Split::kTest);
    if (test.empty()) continue;
    const ClassifierModel& model = models.at(prep);
    const std::string& fp = model.encoder_fingerprint();
    fingerprints.insert(fp);
    for (const auto* inst : test) {
      if (!cache.Contains(inst->id, fp)) {
        const auto available = cache.Fingerprints();
        if (!available.empty() &&
            std::find(available.begin(), available.end(), fp) == available.end()) {
          throw ValidationError("encoder fingerprint mismatch: model for \"" + prep +
                                "\" expects " + fp.substr(0, 12) +
                                " but the cache holds other encoders' embeddings");
        }
        break;
      }
    }
    const auto features = LoadFeatures(test, cache, fp);
    const auto pred = model.PredictBatch(features.AtLayer(model.chosen_layer()));
    PrepositionReport r;
    r.preposition = prep;
    r.chosen_layer = model.chosen_layer();
    r.layer_accuracy = model.layer_accuracy();
    for (size_t i = 0; i < test.size(); ++i) {
      const SenseId& gold = *test[i]->sense;
      r.confusion[{gold, model.label_map()[pred[i]]}] += 1;
      if (!model.IndexOf(gold)) ++r.unpredictable;
    }
    FinalizeReport(r);
    layers[prep] = model.chosen_layer();
    seeds[prep] = model.train_config().seed;
    report.reports.push_back(std::move(r));
  }
  FinalizeAggregates(report);
  report.metadata["encoder_fingerprints"] =
      std::vector<std::string>(fingerprints.begin(), fingerprints.end());
  report.metadata["chosen_layers"] = layers;
  report.metadata["seeds"] = seeds;
  report.metadata["system"] = "mlp";
  return report;
}

std::map<SenseId, size_t> TrainingSupport(const Dataset& dataset,
                                          const std::string& preposition) {
  std::map<SenseId, size_t> out;
  for (Split s : {Split::kTrain, Split::kDev}) {
    for (const auto* inst : dataset.Select(preposition, s)) ++out[*inst->sense];
  }
  return out;
}

EvaluationReport BaselineMostFrequent(const Dataset& dataset) {
  if (!dataset.HasSplit(Split::kTrain) || !dataset.HasSplit(Split::kTest)) {
    throw ValidationError("baseline needs train and test splits");
  }
  EvaluationReport report;
  for (const auto& prep : dataset.Prepositions()) {
    const auto test = dataset.Select(prep, Split::kTest);
    if (test.empty()) continue;
    const auto support = TrainingSupport(dataset, prep);
    if (support.empty()) {
      throw ValidationError("no training data for test preposition \"" + prep + "\"");
    }
    // std::map iterates senses in ascending order, so the first maximum wins.
    SenseId mfs = support.begin()->first;
    size_t best = 0;
    for (const auto& [sense, count] : support) {
      if (count > best) {
        best = count;
        mfs = sense;
      }
    }
    PrepositionReport r;
    r.preposition = prep;
    for (const auto* inst : test) {
      r.confusion[{*inst->sense, mfs}] += 1;
      if (!support.contains(*inst->sense)) ++r.unpredictable;
    }
    FinalizeReport(r);
    report.reports.push_back(std::move(r));
  }
  FinalizeAggregates(report);
  report.metadata["system"] = "most_frequent_sense";
  return report;
}

AnalysisSummary ErrorAnalysis(const PrepositionReport& report,
                              const SenseInventory& inventory,
                              const std::map<SenseId, size_t>& train_support,
                              const AnalysisOptions& options) {
  AnalysisSummary out;
  out.preposition = report.preposition;
  auto support_of = [&](const SenseId& s) -> size_t {
    const auto it = train_support.find(s);
    return it == train_support.end() ? 0 : it->second;
  };
  auto test_support_of = [&](const SenseId& s) -> size_t {
    const auto it = report.per_sense_support.find(s);
    return it == report.per_sense_support.end() ? 0 : it->second;
  };

  for (const auto& [key, count] : report.confusion) {
    if (key.first == key.second || count == 0) continue;
    ConfusionPair p;
    p.gold = key.first;
    p.predicted = key.second;
    p.count = count;
    p.gold_support = support_of(p.gold);
    p.predicted_support = support_of(p.predicted);
    const double share =
        static_cast<double>(count) / static_cast<double>(std::max<size_t>(1, test_support_of(p.gold)));
    const double lo = static_cast<double>(std::min(p.gold_support, p.predicted_support));
    const double hi = static_cast<double>(std::max(p.gold_support, p.predicted_support));
    p.absorption = static_cast<double>(p.predicted_support) >=
                       options.absorption_support_ratio *
                           static_cast<double>(std::max<size_t>(1, p.gold_support)) &&
                   share >= options.absorption_share;
    p.near_synonym = !p.absorption && hi < options.absorption_support_ratio * std::max(1.0, lo) &&
                     share >= options.near_synonym_share;
    out.ranked.push_back(p);
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const ConfusionPair& a, const ConfusionPair& b) { return a.count > b.count; });

  std::set<SenseId> senses;
  for (const auto& e : inventory.Senses(report.preposition)) senses.insert(e.id);
  for (const auto& [s, _] : report.per_sense_support) senses.insert(s);
  for (const auto& [s, _] : train_support) senses.insert(s);
  for (const auto& s : senses) {
    SenseRow row;
    row.sense = s;
    row.train_support = support_of(s);
    row.test_support = test_support_of(s);
    if (const auto it = report.confusion.find({s, s}); it != report.confusion.end()) {
      row.correct = it->second;
    }
    row.accuracy = row.test_support == 0
                       ? 0.0
                       : static_cast<double>(row.correct) / static_cast<double>(row.test_support);
    for (const auto& e : inventory.Senses(report.preposition)) {
      if (e.id == s) row.gloss = e.gloss;
    }
    out.senses.push_back(std::move(row));
  }
  return out;
}

json AnalysisSummary::ToJson() const {
  json pairs = json::array();
  for (const auto& p : ranked) {
    pairs.push_back({{"gold", p.gold.raw()},
                     {"predicted", p.predicted.raw()},
                     {"count", p.count},
                     {"gold_train_support", p.gold_support},
                     {"predicted_train_support", p.predicted_support},
                     {"absorption", p.absorption},
                     {"near_synonym", p.near_synonym}});
  }
  json rows = json::array();
  for (const auto& r : senses) {
    rows.push_back({{"sense", r.sense.raw()},
                    {"train_support", r.train_support},
                    {"test_support", r.test_support},
                    {"correct", r.correct},
                    {"accuracy", r.accuracy},
                    {"gloss", r.gloss ? json(*r.gloss) : json(nullptr)}});
  }
  return {{"prep", preposition}, {"confusions", pairs}, {"senses", rows}};
}

}  // namespace psd
