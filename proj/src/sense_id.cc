#include "psd/sense_id.h"

#include <cctype>
#include <algorithm>
#include <string>
#include <utility>

#include "psd/errors.h"

namespace psd {
namespace {

bool IsSpace(char c) { return std::isspace(static_cast<unsigned char>(c)); }
bool IsDigit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }
bool IsAlpha(char c) { return std::isalpha(static_cast<unsigned char>(c)); }

[[noreturn]] void Fail(std::string_view raw, std::string_view why) {
  throw ParseError("malformed sense id \"" + std::string(raw) + "\": " +
                   std::string(why));
}

}  // namespace

SenseId::SenseId(int super_sense, std::string sub_label)
    : super_sense_(super_sense),
      sub_label_(std::move(sub_label)),
      raw_(std::to_string(super_sense_) + "(" + sub_label_ + ")") {}

std::strong_ordering operator<=>(const SenseId& a, const SenseId& b) {
  if (const auto c = a.super_sense_ <=> b.super_sense_; c != 0) return c;
  auto split = [](const std::string& sub) {
    size_t j = 0;
    while (j < sub.size() && IsDigit(sub[j])) ++j;
    return std::pair<unsigned long long, std::string>(
        j == 0 ? 0ULL : std::stoull(sub.substr(0, std::min<size_t>(j, 18))), sub.substr(j));
  };
  const auto [an, as] = split(a.sub_label_);
  const auto [bn, bs] = split(b.sub_label_);
  if (const auto c = an <=> bn; c != 0) return c;
  if (const auto c = as <=> bs; c != 0) return c;
  return a.raw_ <=> b.raw_;
}

SenseId SenseId::Parse(std::string_view raw) {
  // Whitespace is tolerated anywhere; "4 ( 3 )" normalizes to "4(3)".
  std::string s;
  for (char c : raw) {
    if (!IsSpace(c)) s.push_back(c);
  }
  size_t i = 0;
  while (i < s.size() && IsDigit(s[i])) ++i;
  if (i == 0) Fail(raw, "missing super-sense");
  if (i >= s.size() || s[i] != '(') Fail(raw, "expected '('");
  if (s.back() != ')') Fail(raw, "expected closing ')'");
  const std::string digits = s.substr(0, i);
  const std::string sub = s.substr(i + 1, s.size() - i - 2);
  if (sub.empty()) Fail(raw, "empty sub-sense");
  // Sub-sense: digits optionally followed by letters ("3", "1b", "6a").
  size_t j = 0;
  while (j < sub.size() && IsDigit(sub[j])) ++j;
  if (j == 0) Fail(raw, "sub-sense must start with a digit");
  for (size_t k = j; k < sub.size(); ++k) {
    if (!IsAlpha(sub[k])) Fail(raw, "sub-sense must be digits then letters");
  }
  if (digits.size() > 9) Fail(raw, "super-sense out of range");
  const int super_sense = std::stoi(digits);
  if (super_sense < 1) Fail(raw, "super-sense must be >= 1");
  return SenseId(super_sense, sub);
}

}  // namespace psd
