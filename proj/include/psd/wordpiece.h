#ifndef PSD_WORDPIECE_H_
#define PSD_WORDPIECE_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace psd {

// BERT-style tokenizer: basic cleanup (control removal, optional lowercasing
// and accent stripping, punctuation and CJK splitting) followed by greedy
// longest-match-first WordPiece with "##" continuation pieces.
//
// Unicode handling is table-driven and covers Latin-1, Latin Extended-A,
// Greek and Cyrillic case folding; other scripts pass through unchanged.
class WordPieceTokenizer {
 public:
  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase);

  // One token per line, id = line number.
  static WordPieceTokenizer FromFile(const std::filesystem::path& vocab_file,
                                     bool lowercase);

  // Piece ids for one pre-split word. May be empty (e.g. only control
  // characters); unknown words become a single [UNK].
  std::vector<int> TokenizeWord(std::string_view word) const;

  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }
  int unk_id() const { return unk_id_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  bool lowercase() const { return lowercase_; }

 private:
  std::vector<std::string> BasicSplit(std::string_view word) const;
  void WordPiece(const std::string& word, std::vector<int>& out) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  bool lowercase_;
  int cls_id_ = -1;
  int sep_id_ = -1;
  int unk_id_ = -1;
};

}  // namespace psd

#endif  // PSD_WORDPIECE_H_
