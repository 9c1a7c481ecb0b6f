#include "psd/native_encoder.h"

#include <fstream>
#include <sstream>

#include "psd/digest.h"
#include "psd/errors.h"

namespace psd {

namespace fs = std::filesystem;

namespace {

std::string ReadBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Digest(const TransformerModel& model,
                   const WordPieceTokenizer& tokenizer) {
  Sha256 h;
  h.Update("psd-native-encoder-v1\n");
  h.Update(model.config().ToJson().dump());
  h.Update("\n");
  for (const auto& piece : tokenizer.vocab()) {
    h.Update(piece);
    h.Update("\n");
  }
  h.Update(model.weights().Serialize());
  return h.HexDigest();
}

}  // namespace

NativeEncoder::NativeEncoder(TransformerConfig config, TransformerWeights weights,
                             WordPieceTokenizer tokenizer, int max_tokens)
    : model_(std::move(config), std::move(weights)),
      tokenizer_(std::move(tokenizer)) {
  const auto& c = model_.config();
  if (static_cast<int>(tokenizer_.vocab().size()) != c.vocab_size) {
    throw ValidationError("vocabulary size " +
                          std::to_string(tokenizer_.vocab().size()) +
                          " differs from config vocab_size " +
                          std::to_string(c.vocab_size));
  }
  info_.model_id = c.model_id;
  info_.num_layers = c.num_layers;
  info_.hidden_dim = c.hidden_size;
  info_.max_tokens = max_tokens > 0 ? std::min(max_tokens, c.max_positions)
                                    : c.max_positions;
  if (info_.max_tokens < 3) throw ValidationError("max_tokens must be >= 3");
  info_.fingerprint = Digest(model_, tokenizer_);
}

std::unique_ptr<NativeEncoder> NativeEncoder::Load(const fs::path& dir,
                                                   int max_tokens) {
  const auto config =
      TransformerConfig::FromJson(nlohmann::json::parse(ReadBytes(dir / "config.json")));
  auto weights = TransformerWeights::Deserialize(ReadBytes(dir / "weights.bin"), config);
  auto tokenizer = WordPieceTokenizer::FromFile(dir / "vocab.txt", config.lowercase);
  return std::make_unique<NativeEncoder>(config, std::move(weights),
                                         std::move(tokenizer), max_tokens);
}

void NativeEncoder::Save(const fs::path& dir) const {
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << model_.config().ToJson().dump(2) << '\n';
  {
    std::ofstream vocab(dir / "vocab.txt");
    for (const auto& piece : tokenizer_.vocab()) vocab << piece << '\n';
  }
  std::ofstream(dir / "weights.bin", std::ios::binary) << model_.weights().Serialize();
}

NativeEncoder::PieceStates NativeEncoder::EncodePieces(
    const LabeledInstance& instance) const {
  if (instance.head.start > instance.head.end ||
      instance.head.end >= instance.tokens.size()) {
    throw ValidationError("instance " + instance.id + ": invalid head span");
  }
  std::vector<int> pieces;
  size_t head_begin = 0;
  size_t head_end = 0;
  for (size_t t = 0; t < instance.tokens.size(); ++t) {
    if (t == instance.head.start) head_begin = pieces.size();
    const auto ids = tokenizer_.TokenizeWord(instance.tokens[t]);
    pieces.insert(pieces.end(), ids.begin(), ids.end());
    if (t == instance.head.end) head_end = pieces.size();
  }
  if (head_end <= head_begin) {
    throw StageError("instance " + instance.id +
                     ": head tokens map to zero subword pieces");
  }
  const auto window = CenteredWindow(pieces.size(), head_begin, head_end,
                                     static_cast<size_t>(info_.max_tokens - 2));
  PieceStates out;
  out.ids.reserve(window.end - window.begin + 2);
  out.ids.push_back(tokenizer_.cls_id());
  out.ids.insert(out.ids.end(), pieces.begin() + static_cast<std::ptrdiff_t>(window.begin),
                 pieces.begin() + static_cast<std::ptrdiff_t>(window.end));
  out.ids.push_back(tokenizer_.sep_id());
  for (size_t p = head_begin; p < head_end; ++p) {
    out.head_positions.push_back(p - window.begin + 1);
  }
  out.states = model_.Forward(out.ids);
  return out;
}

LayerMatrix NativeEncoder::Encode(const LabeledInstance& instance) {
  const auto pieces = EncodePieces(instance);
  LayerMatrix m;
  m.instance_id = instance.id;
  m.encoder_fingerprint = info_.fingerprint;
  m.values.resize(static_cast<Eigen::Index>(pieces.states.size()), info_.hidden_dim);
  const float inv = 1.0f / static_cast<float>(pieces.head_positions.size());
  for (size_t j = 0; j < pieces.states.size(); ++j) {
    Eigen::RowVectorXf sum = Eigen::RowVectorXf::Zero(info_.hidden_dim);
    for (size_t pos : pieces.head_positions) {
      sum += pieces.states[j].row(static_cast<Eigen::Index>(pos));
    }
    m.values.row(static_cast<Eigen::Index>(j)) = sum * inv;
  }
  if (!m.values.allFinite()) {
    throw StageError("instance " + instance.id + ": non-finite activation");
  }
  return m;
}

std::string NativeEncoder::ComputeFingerprint() {
  return Digest(model_, tokenizer_);
}

}  // namespace psd
