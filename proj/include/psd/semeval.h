#ifndef PSD_SEMEVAL_H_
#define PSD_SEMEVAL_H_

#include <filesystem>
#include <string_view>
#include <vector>

#include "psd/corpus.h"

namespace psd {

// Reads a lexical-sample distribution: Senseval lexical-sample XML
// files (`<lexelt item="about.p">` / `<instance id=..>` / `<answer
// senseid=..>` / `<context>.. <head>about</head> ..</context>`), optionally
// with answer keys in `.key` files (`about.p <instance-id> <sense> ...`).
// The split of a file comes from a path component or filename containing
// "train" or "test".
std::vector<LabeledInstance> ReadSemevalDirectory(
    const std::filesystem::path& root);

// Parses one lexical-sample XML document. Exposed for tests.
std::vector<LabeledInstance> ParseLexicalSampleXml(std::string_view xml,
                                                   Split split);

}  // namespace psd

#endif  // PSD_SEMEVAL_H_
