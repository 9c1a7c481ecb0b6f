#ifndef PSD_TAGGER_H_
#define PSD_TAGGER_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psd/classifier.h"
#include "psd/corpus.h"
#include "psd/encoder.h"

namespace psd {

struct TagAnnotation {
  size_t start = 0;  // token range, inclusive
  size_t end = 0;
  std::string surface;
  std::string preposition;
  bool modeled = false;
  int layer = -1;
  std::optional<SenseId> sense;
  std::vector<std::pair<SenseId, double>> distribution;  // label-map order
};

struct TagResult {
  std::vector<std::string> tokens;
  std::vector<TagAnnotation> annotations;

  nlohmann::json ToJson() const;
  // "John ate rice with[4(3)] a spoon"; unmodeled matches render as "[?]".
  std::string Inline() const;
};

// Labels every preposition occurrence in raw text. Occurrences are found by
// longest match against the inventory and model lemmas (no part-of-speech
// tagging, so non-prepositional homographs are tagged too).
class Tagger {
 public:
  // Throws ValidationError if a model was trained on another encoder's
  // embeddings.
  Tagger(const std::map<std::string, ClassifierModel>& models,
         const SenseInventory& inventory, Encoder& encoder);

  TagResult Tag(const std::string& text) const;

 private:
  const std::map<std::string, ClassifierModel>& models_;
  Encoder& encoder_;
  // Lemma token sequences, longest first.
  std::vector<std::pair<std::vector<std::string>, std::string>> lemmas_;
};

}  // namespace psd

#endif  // PSD_TAGGER_H_
