#include "psd/tagger.h"

#include <algorithm>
#include <set>

#include "psd/errors.h"
#include "psd/text.h"

namespace psd {

using nlohmann::json;

Tagger::Tagger(const std::map<std::string, ClassifierModel>& models,
               const SenseInventory& inventory, Encoder& encoder)
    : models_(models), encoder_(encoder) {
  for (const auto& [prep, model] : models_) {
    if (model.encoder_fingerprint() != encoder_.info().fingerprint) {
      throw ValidationError("model for \"" + prep +
                            "\" was trained on a different encoder (fingerprint " +
                            model.encoder_fingerprint().substr(0, 12) + " vs " +
                            encoder_.info().fingerprint.substr(0, 12) + ")");
    }
  }
  std::set<std::string> names;
  for (const auto& p : inventory.Prepositions()) names.insert(p);
  for (const auto& [p, _] : models_) names.insert(p);
  for (const auto& name : names) {
    auto parts = TokenizeText(Lowercase(name));
    if (!parts.empty()) lemmas_.emplace_back(std::move(parts), name);
  }
  std::stable_sort(lemmas_.begin(), lemmas_.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });
}

TagResult Tagger::Tag(const std::string& text) const {
  TagResult result;
  result.tokens = TokenizeText(text);
  const auto& tokens = result.tokens;
  for (size_t i = 0; i < tokens.size();) {
    const std::pair<std::vector<std::string>, std::string>* match = nullptr;
    for (const auto& lemma : lemmas_) {
      const auto& parts = lemma.first;
      if (i + parts.size() > tokens.size()) continue;
      bool ok = true;
      for (size_t k = 0; k < parts.size() && ok; ++k) {
        ok = Lowercase(tokens[i + k]) == parts[k];
      }
      if (ok) {
        match = &lemma;
        break;
      }
    }
    if (match == nullptr) {
      ++i;
      continue;
    }
    TagAnnotation a;
    a.start = i;
    a.end = i + match->first.size() - 1;
    a.preposition = match->second;
    for (size_t k = a.start; k <= a.end; ++k) {
      if (k > a.start) a.surface.push_back(' ');
      a.surface += tokens[k];
    }
    if (const auto it = models_.find(a.preposition); it != models_.end()) {
      const ClassifierModel& model = it->second;
      LabeledInstance inst;
      inst.id = "tag:" + std::to_string(i);
      inst.tokens = tokens;
      inst.head = {a.start, a.end};
      inst.preposition = a.preposition;
      const LayerMatrix m = encoder_.Encode(inst);
      const VectorF v = m.values.row(model.chosen_layer()).transpose();
      const VectorF p = model.Probabilities(v);
      a.modeled = true;
      a.layer = model.chosen_layer();
      a.sense = model.label_map()[model.PredictIndex(v)];
      for (size_t s = 0; s < model.label_map().size(); ++s) {
        a.distribution.emplace_back(model.label_map()[s],
                                    static_cast<double>(p[static_cast<Eigen::Index>(s)]));
      }
    }
    result.annotations.push_back(std::move(a));
    i = result.annotations.back().end + 1;
  }
  return result;
}

json TagResult::ToJson() const {
  json anns = json::array();
  for (const auto& a : annotations) {
    json dist = json::array();
    for (const auto& [sense, p] : a.distribution) {
      dist.push_back({{"sense", sense.raw()}, {"p", p}});
    }
    json j = {{"start", a.start},
              {"end", a.end},
              {"surface", a.surface},
              {"prep", a.preposition},
              {"unmodeled", !a.modeled}};
    if (a.modeled) {
      j["sense"] = a.sense->raw();
      j["layer"] = a.layer;
      j["distribution"] = dist;
    }
    anns.push_back(std::move(j));
  }
  return {{"tokens", tokens},
          {"annotations", anns},
          {"note", "prepositions are matched by lemma; non-prepositional homographs "
                   "may be tagged"}};
}

std::string TagResult::Inline() const {
  std::string out;
  size_t next = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
    if (next < annotations.size() && annotations[next].end == i) {
      const auto& a = annotations[next];
      out += "[" + (a.modeled ? a.sense->raw() : std::string("?")) + "]";
      ++next;
    }
  }
  return out;
}

}  // namespace psd
