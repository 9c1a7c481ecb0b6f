#include "psd/wordpiece.h"

#include <fstream>

#include "psd/errors.h"

namespace psd {
namespace {

constexpr size_t kMaxCharsPerWord = 100;

std::vector<char32_t> DecodeUtf8(std::string_view s) {
  std::vector<char32_t> out;
  for (size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = c;
    if (c >= 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    for (int k = 1; k < len; ++k) {
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    }
    out.push_back(len == 1 && c >= 0x80 ? 0xFFFD : cp);
    i += len;
  }
  return out;
}

void AppendUtf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t ToLower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 32;
  if ((c >= 0xC0 && c <= 0xDE && c != 0xD7)) return c + 32;
  if (c >= 0x100 && c <= 0x17F) {
    // Latin Extended-A alternates upper/lower, with a shifted run in the
    // middle (U+0139..U+0148, U+0179..U+017E).
    const bool odd_run = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    if (c == 0x130) return 'i';
    if (c == 0x138) return c;
    if (c == 0x178) return 0xFF;
    if (odd_run) return (c % 2 == 1) ? c + 1 : c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;  // Greek
  if (c >= 0x410 && c <= 0x42F) return c + 32;                // Cyrillic
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

// Base letter for precomposed Latin letters; 0 when not decomposable.
char32_t StripAccent(char32_t c) {
  static constexpr char kLatin1[] =
      // U+00C0..U+00FF
      "AAAAAA\0CEEEEIIII\0NOOOOO\0\0UUUUY\0\0aaaaaa\0ceeeeiiii\0nooooo\0\0uuuuy\0y";
  if (c >= 0xC0 && c <= 0xFF) {
    const char base = kLatin1[c - 0xC0];
    return static_cast<char32_t>(static_cast<unsigned char>(base));
  }
  static constexpr char kExtA[] =
      // U+0100..U+017F
      "AaAaAaCcCcCcCcDd\0\0EeEeEeEeEeGgGgGgGgHh\0\0IiIiIiIiI\0\0\0JjKk\0LlLlLl\0\0\0\0NnNnNn\0\0\0OoOoOo\0\0RrRrRrSsSsSsSsTtTt\0\0UuUuUuUuUuUuWwYyYZzZzZz\0";
  if (c >= 0x100 && c <= 0x17F) {
    const char base = kExtA[c - 0x100];
    return static_cast<char32_t>(static_cast<unsigned char>(base));
  }
  return 0;
}

bool IsCombiningMark(char32_t c) { return c >= 0x300 && c <= 0x36F; }

bool IsControl(char32_t c) {
  if (c == '\t' || c == '\n' || c == '\r') return false;
  return c < 0x20 || (c >= 0x7F && c < 0xA0) || c == 0xFFFD ||
         (c >= 0x200B && c <= 0x200F) || c == 0xFEFF;
}

bool IsWhitespace(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0xA0 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

bool IsPunctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
      (c >= 123 && c <= 126)) {
    return true;
  }
  return (c >= 0xA1 && c <= 0xBF && c != 0xAA && c != 0xB2 && c != 0xB3 &&
          c != 0xB5 && c != 0xB9 && c != 0xBA && c != 0xBC && c != 0xBD &&
          c != 0xBE) ||
         (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011);
}

bool IsCjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0x2A700 && c <= 0x2B73F) ||
         (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B820 && c <= 0x2CEAF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab,
                                       bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  for (size_t i = 0; i < vocab_.size(); ++i) {
    index_.emplace(vocab_[i], static_cast<int>(i));
  }
  auto require = [&](const char* tok) {
    const auto it = index_.find(tok);
    if (it == index_.end()) {
      throw ValidationError(std::string("vocabulary lacks ") + tok);
    }
    return it->second;
  };
  cls_id_ = require("[CLS]");
  sep_id_ = require("[SEP]");
  unk_id_ = require("[UNK]");
}

WordPieceTokenizer WordPieceTokenizer::FromFile(
    const std::filesystem::path& vocab_file, bool lowercase) {
  std::ifstream in(vocab_file);
  if (!in) throw ValidationError("cannot open vocabulary " + vocab_file.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

std::vector<std::string> WordPieceTokenizer::BasicSplit(
    std::string_view word) const {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char32_t c : DecodeUtf8(word)) {
    if (c == 0 || IsControl(c)) continue;
    if (IsWhitespace(c)) {
      flush();
      continue;
    }
    if (lowercase_) {
      c = ToLower(c);
      if (IsCombiningMark(c)) continue;
      if (const char32_t base = StripAccent(c); base != 0) c = base;
    }
    if (IsPunctuation(c) || IsCjk(c)) {
      flush();
      std::string single;
      AppendUtf8(c, single);
      out.push_back(std::move(single));
      continue;
    }
    AppendUtf8(c, cur);
  }
  flush();
  return out;
}

void WordPieceTokenizer::WordPiece(const std::string& word,
                                   std::vector<int>& out) const {
  const auto chars = DecodeUtf8(word);
  if (chars.size() > kMaxCharsPerWord) {
    out.push_back(unk_id_);
    return;
  }
  // Byte offsets of code point boundaries.
  std::vector<size_t> offsets;
  offsets.reserve(chars.size() + 1);
  {
    size_t off = 0;
    for (char32_t c : chars) {
      offsets.push_back(off);
      std::string tmp;
      AppendUtf8(c, tmp);
      off += tmp.size();
    }
    offsets.push_back(off);
  }
  std::vector<int> pieces;
  size_t start = 0;
  while (start < chars.size()) {
    size_t end = chars.size();
    int found = -1;
    while (start < end) {
      std::string sub = word.substr(offsets[start], offsets[end] - offsets[start]);
      if (start > 0) sub = "##" + sub;
      if (const auto it = index_.find(sub); it != index_.end()) {
        found = it->second;
        break;
      }
      --end;
    }
    if (found < 0) {
      out.push_back(unk_id_);
      return;
    }
    pieces.push_back(found);
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<int> WordPieceTokenizer::TokenizeWord(std::string_view word) const {
  std::vector<int> out;
  for (const auto& w : BasicSplit(word)) WordPiece(w, out);
  return out;
}

}  // namespace psd
