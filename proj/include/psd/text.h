#ifndef PSD_TEXT_H_
#define PSD_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace psd {

// Splits on whitespace and separates every ASCII punctuation character into
// its own token. Non-ASCII bytes are kept inside words.
std::vector<std::string> TokenizeText(std::string_view text);

// ASCII lowercase; other bytes are copied unchanged.
std::string Lowercase(std::string_view s);

// Collapses runs of whitespace to a single space and trims both ends.
std::string NormalizeSpace(std::string_view s);

// Lowercased, space-joined form of tokens[first..last].
std::string JoinLower(const std::vector<std::string>& tokens, size_t first,
                      size_t last);

}  // namespace psd

#endif  // PSD_TEXT_H_
