#include "psd/augment.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>

#include "json.hpp"
#include "psd/errors.h"

namespace psd {

namespace fs = std::filesystem;
using nlohmann::json;

size_t VariantCount(const std::vector<SubstitutionRule>& rules) {
  constexpr size_t kMax = std::numeric_limits<size_t>::max();
  size_t product = 1;
  for (const auto& r : rules) {
    const size_t factor = r.replacements.size() + 1;
    if (product > kMax / factor) return kMax;
    product *= factor;
  }
  return product - 1;
}

namespace {

void ValidateRules(const LabeledInstance& instance,
                   const std::vector<SubstitutionRule>& rules) {
  std::set<size_t> seen;
  for (const auto& r : rules) {
    const size_t i = r.target_token_index;
    if (i >= instance.tokens.size()) {
      throw ValidationError("instance " + instance.id + ": rule index " +
                            std::to_string(i) + " out of range");
    }
    if (instance.head.Contains(i)) {
      throw ValidationError("instance " + instance.id + ": rule index " +
                            std::to_string(i) + " touches the preposition");
    }
    if (!seen.insert(i).second) {
      throw ValidationError("instance " + instance.id + ": two rules on token " +
                            std::to_string(i));
    }
    if (r.replacements.empty()) {
      throw ValidationError("instance " + instance.id + ": rule on token " +
                            std::to_string(i) + " has no replacements");
    }
    for (const auto& w : r.replacements) {
      if (w == instance.tokens[i]) {
        throw ValidationError("instance " + instance.id + ": replacement \"" + w +
                              "\" equals the original token");
      }
    }
  }
}

}  // namespace

std::vector<LabeledInstance> Substitute(const LabeledInstance& instance,
                                        const std::vector<SubstitutionRule>& rules,
                                        size_t cap) {
  ValidateRules(instance, rules);
  std::vector<LabeledInstance> out;
  const size_t limit = cap == 0 ? std::numeric_limits<size_t>::max() : cap;
  const size_t m = rules.size();

  std::vector<size_t> subset;
  std::vector<size_t> choice;
  auto emit = [&] {
    LabeledInstance v = instance;
    for (size_t k = 0; k < subset.size(); ++k) {
      const auto& rule = rules[subset[k]];
      v.tokens[rule.target_token_index] = rule.replacements[choice[k]];
    }
    v.id = instance.id + "#aug" + std::to_string(out.size() + 1);
    out.push_back(std::move(v));
  };
  // Odometer over the replacement choices of a fixed subset.
  auto emit_all_choices = [&] {
    choice.assign(subset.size(), 0);
    while (out.size() < limit) {
      emit();
      bool advanced = false;
      for (size_t k = subset.size(); k > 0 && !advanced;) {
        --k;
        if (++choice[k] < rules[subset[k]].replacements.size()) {
          advanced = true;
        } else {
          choice[k] = 0;
        }
      }
      if (!advanced) return;
    }
  };
  // Subsets of size `size` in lexicographic order.
  for (size_t size = 1; size <= m && out.size() < limit; ++size) {
    subset.resize(size);
    for (size_t k = 0; k < size; ++k) subset[k] = k;
    while (out.size() < limit) {
      emit_all_choices();
      size_t k = size;
      while (k > 0 && subset[k - 1] == m - size + (k - 1)) --k;
      if (k == 0) break;
      ++subset[k - 1];
      for (size_t t = k; t < size; ++t) subset[t] = subset[t - 1] + 1;
    }
  }
  return out;
}

Lexicon LoadLexicon(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open lexicon " + path.string());
  Lexicon lexicon;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      auto& words = lexicon[j.at("class").get<std::string>()];
      for (const auto& w : j.at("words")) {
        const auto word = w.get<std::string>();
        if (std::find(words.begin(), words.end(), word) == words.end()) {
          words.push_back(word);
        }
      }
    } catch (const json::exception& e) {
      throw ValidationError("bad lexicon line in " + path.string() + ": " + e.what());
    }
  }
  return lexicon;
}

std::vector<RuleBinding> LoadRuleBindings(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open rule file " + path.string());
  std::vector<RuleBinding> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("index").get<size_t>(),
                     j.at("class").get<std::string>()});
    } catch (const json::exception& e) {
      throw ValidationError("bad rule line in " + path.string() + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, std::vector<SubstitutionRule>> ResolveRules(
    const Dataset& dataset, const std::vector<RuleBinding>& bindings,
    const Lexicon& lexicon) {
  std::map<std::string, const LabeledInstance*> by_id;
  for (const auto& inst : dataset.instances()) by_id[inst.id] = &inst;
  std::map<std::string, std::vector<SubstitutionRule>> out;
  for (const auto& b : bindings) {
    const auto it = by_id.find(b.instance_id);
    if (it == by_id.end()) {
      throw ValidationError("rule names unknown instance " + b.instance_id);
    }
    const auto lex = lexicon.find(b.property_class);
    if (lex == lexicon.end()) {
      throw ValidationError("rule names unknown lexicon class " + b.property_class);
    }
    const auto& tokens = it->second->tokens;
    SubstitutionRule rule{b.token_index, {}, b.property_class};
    for (const auto& w : lex->second) {
      if (b.token_index >= tokens.size() || w != tokens[b.token_index]) {
        rule.replacements.push_back(w);
      }
    }
    out[b.instance_id].push_back(std::move(rule));
  }
  return out;
}

Dataset Augment(const Dataset& dataset, const std::vector<RuleBinding>& bindings,
                const Lexicon& lexicon, size_t cap) {
  const auto rules = ResolveRules(dataset, bindings, lexicon);
  std::vector<LabeledInstance> out = dataset.instances();
  for (const auto& inst : dataset.instances()) {
    const auto it = rules.find(inst.id);
    if (it == rules.end()) continue;
    auto variants = Substitute(inst, it->second, cap);
    out.insert(out.end(), std::make_move_iterator(variants.begin()),
               std::make_move_iterator(variants.end()));
  }
  return Dataset(std::move(out), dataset.inventory());
}

}  // namespace psd
