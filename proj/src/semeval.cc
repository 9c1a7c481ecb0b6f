#include "psd/semeval.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "psd/errors.h"
#include "psd/text.h"

namespace psd {

namespace fs = std::filesystem;

namespace {

std::string DecodeEntities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const std::string_view ent = s.substr(i + 1, semi - i - 1);
    std::string rep;
    if (ent == "amp") rep = "&";
    else if (ent == "lt") rep = "<";
    else if (ent == "gt") rep = ">";
    else if (ent == "quot") rep = "\"";
    else if (ent == "apos") rep = "'";
    else if (ent.size() > 1 && ent[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = ent[1] == 'x' || ent[1] == 'X'
                 ? std::stoul(std::string(ent.substr(2)), nullptr, 16)
                 : std::stoul(std::string(ent.substr(1)));
      } catch (const std::exception&) {
        out.push_back('&');
        continue;
      }
      // UTF-8 encode.
      if (cp < 0x80) {
        rep.push_back(static_cast<char>(cp));
      } else if (cp < 0x800) {
        rep.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        rep.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
      } else if (cp < 0x10000) {
        rep.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        rep.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        rep.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
      } else {
        rep.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        rep.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        rep.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        rep.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
      }
    } else {
      out.push_back('&');
      continue;
    }
    out += rep;
    i = semi;
  }
  return out;
}

// Removes every markup tag, keeping the text between them.
std::string StripTags(std::string_view s) {
  std::string out;
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') {
      in_tag = true;
      out.push_back(' ');
    } else if (c == '>') {
      in_tag = false;
    } else if (!in_tag) {
      out.push_back(c);
    }
  }
  return out;
}

std::string Attribute(std::string_view tag, std::string_view name) {
  const std::regex re(std::string(name) + R"(\s*=\s*(?:"([^"]*)\"|'([^']*)'))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(tag.begin(), tag.end(), m, re)) return {};
  return DecodeEntities(m[1].matched ? m[1].str() : m[2].str());
}

// "in_front_of.p" -> "in front of".
std::string LemmaFromItem(std::string item) {
  if (const auto dot = item.rfind('.'); dot != std::string::npos &&
                                        item.size() - dot <= 2) {
    item.resize(dot);
  }
  std::replace(item.begin(), item.end(), '_', ' ');
  return Lowercase(NormalizeSpace(item));
}

size_t FindTag(std::string_view s, std::string_view name, size_t from) {
  // Matches "<name" followed by whitespace, '>' or '/'.
  const std::string open = "<" + std::string(name);
  for (size_t pos = s.find(open, from); pos != std::string_view::npos;
       pos = s.find(open, pos + 1)) {
    const size_t after = pos + open.size();
    if (after < s.size() &&
        (s[after] == '>' || s[after] == '/' || std::isspace(static_cast<unsigned char>(s[after])))) {
      return pos;
    }
  }
  return std::string_view::npos;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<Split> SplitFromPath(const fs::path& path) {
  for (const auto& part : path) {
    const std::string lower = Lowercase(part.string());
    if (lower.find("train") != std::string::npos) return Split::kTrain;
    if (lower.find("test") != std::string::npos) return Split::kTest;
  }
  return std::nullopt;
}

}  // namespace

std::vector<LabeledInstance> ParseLexicalSampleXml(std::string_view xml,
                                                   Split split) {
  std::vector<LabeledInstance> out;
  std::string lemma;
  size_t lexelt_next = FindTag(xml, "lexelt", 0);
  size_t pos = 0;
  while (true) {
    const size_t inst_pos = FindTag(xml, "instance", pos);
    if (inst_pos == std::string_view::npos) break;
    // Track the enclosing lexelt.
    while (lexelt_next != std::string_view::npos && lexelt_next < inst_pos) {
      const size_t close = xml.find('>', lexelt_next);
      lemma = LemmaFromItem(
          Attribute(xml.substr(lexelt_next, close - lexelt_next), "item"));
      lexelt_next = FindTag(xml, "lexelt", close);
    }
    const size_t tag_end = xml.find('>', inst_pos);
    const size_t inst_end = xml.find("</instance>", inst_pos);
    if (tag_end == std::string_view::npos || inst_end == std::string_view::npos) {
      throw ValidationError("unterminated <instance> element");
    }
    const std::string_view tag = xml.substr(inst_pos, tag_end - inst_pos);
    const std::string_view body = xml.substr(tag_end + 1, inst_end - tag_end - 1);
    pos = inst_end + 1;

    LabeledInstance inst;
    inst.id = Attribute(tag, "id");
    if (inst.id.empty()) throw ValidationError("<instance> without id");
    inst.preposition = lemma;
    inst.split = split;

    if (const size_t a = FindTag(body, "answer", 0); a != std::string_view::npos) {
      const size_t a_end = body.find('>', a);
      const std::string sense = Attribute(body.substr(a, a_end - a), "senseid");
      if (!sense.empty()) inst.sense = SenseId::Parse(sense);
    }

    const size_t ctx = FindTag(body, "context", 0);
    const size_t ctx_end = body.find("</context>");
    if (ctx == std::string_view::npos || ctx_end == std::string_view::npos) {
      throw ValidationError("instance " + inst.id + ": missing <context>");
    }
    const std::string_view context =
        body.substr(body.find('>', ctx) + 1, ctx_end - body.find('>', ctx) - 1);
    const size_t h = FindTag(context, "head", 0);
    const size_t h_end = context.find("</head>");
    if (h == std::string_view::npos || h_end == std::string_view::npos) {
      throw ValidationError("instance " + inst.id + ": head marker absent");
    }
    const size_t h_open_end = context.find('>', h) + 1;
    const auto before = TokenizeText(DecodeEntities(StripTags(context.substr(0, h))));
    const auto head =
        TokenizeText(DecodeEntities(StripTags(context.substr(h_open_end, h_end - h_open_end))));
    const auto after = TokenizeText(DecodeEntities(StripTags(context.substr(h_end + 7))));
    if (head.empty()) {
      throw ValidationError("instance " + inst.id + ": empty head marker");
    }
    inst.tokens = before;
    inst.tokens.insert(inst.tokens.end(), head.begin(), head.end());
    inst.tokens.insert(inst.tokens.end(), after.begin(), after.end());
    inst.head = {before.size(), before.size() + head.size() - 1};
    if (inst.preposition.empty()) {
      inst.preposition = JoinLower(inst.tokens, inst.head.start, inst.head.end);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<LabeledInstance> ReadSemevalDirectory(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw ValidationError(root.string() + " is not a directory");
  }
  std::vector<fs::path> xml_files;
  std::vector<fs::path> key_files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".xml") xml_files.push_back(entry.path());
    if (ext == ".key") key_files.push_back(entry.path());
  }
  std::sort(xml_files.begin(), xml_files.end());
  std::sort(key_files.begin(), key_files.end());
  if (xml_files.empty()) {
    throw ValidationError("no lexical-sample .xml files under " + root.string());
  }

  std::map<std::string, std::string> keys;
  for (const auto& file : key_files) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string item, id, sense;
      if (ss >> item >> id >> sense) keys[id] = sense;  // first answer wins
    }
  }

  std::vector<LabeledInstance> out;
  for (const auto& file : xml_files) {
    const auto rel = fs::relative(file, root);
    const auto split = SplitFromPath(rel);
    if (!split) {
      throw ValidationError("cannot tell train/test split of " + rel.string());
    }
    for (auto& inst : ParseLexicalSampleXml(ReadFile(file), *split)) {
      if (const auto it = keys.find(inst.id); it != keys.end()) {
        inst.sense = SenseId::Parse(it->second);
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace psd
