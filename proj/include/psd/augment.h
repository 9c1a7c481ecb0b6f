#ifndef PSD_AUGMENT_H_
#define PSD_AUGMENT_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "psd/corpus.h"

namespace psd {

// Swaps one token (a point-of-attachment or complement word) for words of
// the same property class, e.g. LOCATION.
struct SubstitutionRule {
  size_t target_token_index = 0;
  std::vector<std::string> replacements;
  std::string property_class;
};

inline constexpr size_t kDefaultVariantCap = 16;

// Number of variants `Substitute` yields without a cap: every non-empty
// subset of rules, with one replacement chosen per rule in the subset,
// i.e. prod(1 + r_i) - 1. Saturates at SIZE_MAX.
size_t VariantCount(const std::vector<SubstitutionRule>& rules);

// Generates sense-preserving variants of `instance`: tokens swapped, head
// span, preposition, sense and split copied. Variants are ordered by the
// number of rules applied, then by rule position and replacement order;
// at most `cap` are returned (0 = no cap). Ids are "<id>#aug<n>", n from 1.
// Throws ValidationError for a rule touching the head span, an index out of
// range, two rules on one token, or a rule without usable replacements.
std::vector<LabeledInstance> Substitute(const LabeledInstance& instance,
                                        const std::vector<SubstitutionRule>& rules,
                                        size_t cap = kDefaultVariantCap);

// Property class -> words. File: one {"class": "...", "words": [...]} per line.
using Lexicon = std::map<std::string, std::vector<std::string>>;
Lexicon LoadLexicon(const std::filesystem::path& path);

// Binds a token of an instance to a lexicon class. File: one
// {"id": "...", "index": N, "class": "..."} per line.
struct RuleBinding {
  std::string instance_id;
  size_t token_index = 0;
  std::string property_class;
};
std::vector<RuleBinding> LoadRuleBindings(const std::filesystem::path& path);

// Resolves bindings against the lexicon; the original token is dropped from
// its replacement list.
std::map<std::string, std::vector<SubstitutionRule>> ResolveRules(
    const Dataset& dataset, const std::vector<RuleBinding>& bindings,
    const Lexicon& lexicon);

// Original instances followed by the variants of every bound instance.
Dataset Augment(const Dataset& dataset, const std::vector<RuleBinding>& bindings,
                const Lexicon& lexicon, size_t cap = kDefaultVariantCap);

}  // namespace psd

#endif  // PSD_AUGMENT_H_
