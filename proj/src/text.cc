#include "psd/text.h"

#include <cctype>

namespace psd {
namespace {

bool IsSpace(unsigned char c) { return std::isspace(c) != 0; }
bool IsAsciiPunct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

}  // namespace

std::vector<std::string> TokenizeText(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsSpace(c)) {
      flush();
    } else if (IsAsciiPunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

std::string Lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (static_cast<unsigned char>(c) < 128) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

std::string NormalizeSpace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (IsSpace(static_cast<unsigned char>(c))) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string JoinLower(const std::vector<std::string>& tokens, size_t first,
                      size_t last) {
  std::string out;
  for (size_t i = first; i <= last && i < tokens.size(); ++i) {
    if (i > first) out.push_back(' ');
    out += tokens[i];
  }
  return Lowercase(NormalizeSpace(out));
}

}  // namespace psd
