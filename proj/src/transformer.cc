#include "psd/transformer.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>

#include "psd/errors.h"
#include "psd/rng.h"

namespace psd {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'S', 'D', 'W'};
constexpr uint32_t kVersion = 1;

// Visits every tensor under its canonical name. `Fn(name, data, rows, cols)`
// receives a pointer to rows*cols contiguous floats.
template <typename W, typename Fn>
void ForEachTensor(W& w, Fn&& fn) {
  auto mat = [&](const std::string& name, auto& m) {
    fn(name, m.data(), static_cast<size_t>(m.rows()), static_cast<size_t>(m.cols()));
  };
  auto vec = [&](const std::string& name, auto& v) {
    fn(name, v.data(), static_cast<size_t>(v.size()), size_t{1});
  };
  auto linear = [&](const std::string& name, auto& l) {
    mat(name + ".weight", l.weight);
    vec(name + ".bias", l.bias);
  };
  auto norm = [&](const std::string& name, auto& n) {
    vec(name + ".gamma", n.gamma);
    vec(name + ".beta", n.beta);
  };
  mat("embeddings.word", w.word_embeddings);
  mat("embeddings.position", w.position_embeddings);
  mat("embeddings.token_type", w.token_type_embeddings);
  norm("embeddings.norm", w.embedding_norm);
  for (size_t i = 0; i < w.blocks.size(); ++i) {
    auto& b = w.blocks[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    linear(p + "attention.query", b.query);
    linear(p + "attention.key", b.key);
    linear(p + "attention.value", b.value);
    linear(p + "attention.output", b.attention_output);
    norm(p + "attention.norm", b.attention_norm);
    linear(p + "ffn.in", b.ffn_in);
    linear(p + "ffn.out", b.ffn_out);
    norm(p + "ffn.norm", b.ffn_norm);
  }
}

TransformerWeights Allocate(const TransformerConfig& c) {
  TransformerWeights w;
  const int d = c.hidden_size;
  w.word_embeddings.resize(c.vocab_size, d);
  w.position_embeddings.resize(c.max_positions, d);
  w.token_type_embeddings.resize(std::max(1, c.type_vocab_size), d);
  w.embedding_norm = {VectorF(d), VectorF(d)};
  auto linear = [](int out, int in) { return LinearWeights{RowMatrixF(out, in), VectorF(out)}; };
  for (int i = 0; i < c.num_layers; ++i) {
    TransformerBlockWeights b;
    b.query = linear(d, d);
    b.key = linear(d, d);
    b.value = linear(d, d);
    b.attention_output = linear(d, d);
    b.attention_norm = {VectorF(d), VectorF(d)};
    b.ffn_in = linear(c.intermediate_size, d);
    b.ffn_out = linear(d, c.intermediate_size);
    b.ffn_norm = {VectorF(d), VectorF(d)};
    w.blocks.push_back(std::move(b));
  }
  return w;
}

void LayerNormRows(RowMatrixF& x, const LayerNormWeights& n, float eps) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    const float mean = row.mean();
    const float var = (row.array() - mean).square().mean();
    const float inv = 1.0f / std::sqrt(var + eps);
    row = ((row.array() - mean) * inv).matrix().cwiseProduct(n.gamma.transpose()) +
          n.beta.transpose();
  }
}

RowMatrixF Apply(const LinearWeights& l, const RowMatrixF& x) {
  RowMatrixF y = x * l.weight.transpose();
  y.rowwise() += l.bias.transpose();
  return y;
}

void Activate(RowMatrixF& x, const std::string& kind) {
  if (kind == "relu") {
    x = x.cwiseMax(0.0f);
  } else if (kind == "gelu_new" || kind == "gelu_pytorch_tanh") {
    const float k = std::sqrt(2.0f / std::numbers::pi_v<float>);
    x = x.unaryExpr([k](float v) {
      return 0.5f * v * (1.0f + std::tanh(k * (v + 0.044715f * v * v * v)));
    });
  } else {
    x = x.unaryExpr([](float v) {
      return 0.5f * v * (1.0f + std::erf(v / std::numbers::sqrt2_v<float>));
    });
  }
}

}  // namespace

json TransformerConfig::ToJson() const {
  return {{"model_id", model_id},
          {"vocab_size", vocab_size},
          {"hidden_size", hidden_size},
          {"num_layers", num_layers},
          {"num_heads", num_heads},
          {"intermediate_size", intermediate_size},
          {"max_positions", max_positions},
          {"type_vocab_size", type_vocab_size},
          {"layer_norm_eps", layer_norm_eps},
          {"activation", activation},
          {"lowercase", lowercase}};
}

TransformerConfig TransformerConfig::FromJson(const json& j) {
  TransformerConfig c;
  try {
    c.model_id = j.value("model_id", c.model_id);
    c.vocab_size = j.at("vocab_size").get<int>();
    c.hidden_size = j.at("hidden_size").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.intermediate_size = j.at("intermediate_size").get<int>();
    c.max_positions = j.value("max_positions", c.max_positions);
    c.type_vocab_size = j.value("type_vocab_size", c.type_vocab_size);
    c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
    c.activation = j.value("activation", c.activation);
    c.lowercase = j.value("lowercase", c.lowercase);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad encoder config: ") + e.what());
  }
  c.Validate();
  return c;
}

void TransformerConfig::Validate() const {
  if (vocab_size <= 0 || hidden_size <= 0 || num_layers <= 0 ||
      num_heads <= 0 || intermediate_size <= 0 || max_positions <= 2) {
    throw ValidationError("encoder config has non-positive sizes");
  }
  if (hidden_size % num_heads != 0) {
    throw ValidationError("hidden_size must be divisible by num_heads");
  }
}

TransformerWeights TransformerWeights::Random(const TransformerConfig& config,
                                              uint64_t seed) {
  config.Validate();
  TransformerWeights w = Allocate(config);
  Rng rng(seed);
  auto normal = [&rng] {
    // Box-Muller on the portable uniform stream.
    const double u1 = 1.0 - rng.UniformUnit();
    const double u2 = rng.UniformUnit();
    return static_cast<float>(0.02 * std::sqrt(-2.0 * std::log(u1)) *
                              std::cos(2.0 * std::numbers::pi * u2));
  };
  ForEachTensor(w, [&](const std::string& name, float* data, size_t rows, size_t cols) {
    const size_t n = rows * cols;
    if (name.ends_with(".gamma")) {
      std::fill(data, data + n, 1.0f);
    } else if (name.ends_with(".beta") || name.ends_with(".bias")) {
      std::fill(data, data + n, 0.0f);
    } else {
      for (size_t i = 0; i < n; ++i) data[i] = normal();
    }
  });
  return w;
}

std::string TransformerWeights::Serialize() const {
  json table = json::array();
  uint64_t offset = 0;
  ForEachTensor(*this, [&](const std::string& name, const float*, size_t rows, size_t cols) {
    table.push_back({{"name", name}, {"shape", {rows, cols}}, {"offset", offset}});
    offset += rows * cols * sizeof(float);
  });
  const std::string header = json{{"tensors", table}}.dump();
  std::string out;
  out.append(kMagic, 4);
  const uint32_t version = kVersion;
  out.append(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t header_len = header.size();
  out.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out += header;
  out.reserve(out.size() + offset);
  ForEachTensor(*this, [&](const std::string&, const float* data, size_t rows, size_t cols) {
    out.append(reinterpret_cast<const char*>(data), rows * cols * sizeof(float));
  });
  return out;
}

TransformerWeights TransformerWeights::Deserialize(
    const std::string& bytes, const TransformerConfig& config) {
  config.Validate();
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ValidationError("not an encoder weight file (bad magic)");
  }
  uint32_t version = 0;
  uint64_t header_len = 0;
  std::memcpy(&version, bytes.data() + 4, sizeof(version));
  std::memcpy(&header_len, bytes.data() + 8, sizeof(header_len));
  if (version != kVersion) {
    throw ValidationError("unsupported encoder weight version " +
                          std::to_string(version));
  }
  if (16 + header_len > bytes.size()) {
    throw ValidationError("truncated encoder weight header");
  }
  const json header = json::parse(bytes.substr(16, header_len));
  std::map<std::string, json> entries;
  for (const auto& t : header.at("tensors")) {
    entries[t.at("name").get<std::string>()] = t;
  }
  const size_t data_start = 16 + header_len;
  TransformerWeights w = Allocate(config);
  ForEachTensor(w, [&](const std::string& name, float* data, size_t rows, size_t cols) {
    const auto it = entries.find(name);
    if (it == entries.end()) {
      throw ValidationError("encoder weights missing tensor " + name);
    }
    const auto shape = it->second.at("shape").get<std::vector<size_t>>();
    if (shape.size() != 2 || shape[0] != rows || shape[1] != cols) {
      throw ValidationError("encoder tensor " + name + " has wrong shape");
    }
    const size_t off = data_start + it->second.at("offset").get<size_t>();
    const size_t len = rows * cols * sizeof(float);
    if (off + len > bytes.size()) {
      throw ValidationError("encoder tensor " + name + " is truncated");
    }
    std::memcpy(data, bytes.data() + off, len);
  });
  return w;
}

TransformerModel::TransformerModel(TransformerConfig config,
                                   TransformerWeights weights)
    : config_(std::move(config)), weights_(std::move(weights)) {
  config_.Validate();
  if (static_cast<int>(weights_.blocks.size()) != config_.num_layers ||
      weights_.word_embeddings.rows() != config_.vocab_size ||
      weights_.word_embeddings.cols() != config_.hidden_size) {
    throw ValidationError("encoder weights do not match config");
  }
}

RowMatrixF TransformerModel::Block(const TransformerBlockWeights& w,
                                   const RowMatrixF& x) const {
  const Eigen::Index seq = x.rows();
  const int heads = config_.num_heads;
  const int head_dim = config_.hidden_size / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));

  const RowMatrixF q = Apply(w.query, x);
  const RowMatrixF k = Apply(w.key, x);
  const RowMatrixF v = Apply(w.value, x);
  RowMatrixF context(seq, config_.hidden_size);
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * head_dim, head_dim);
    const auto kh = k.middleCols(h * head_dim, head_dim);
    const auto vh = v.middleCols(h * head_dim, head_dim);
    RowMatrixF scores = (qh * kh.transpose()) * scale;
    for (Eigen::Index r = 0; r < seq; ++r) {
      auto row = scores.row(r);
      row.array() -= row.maxCoeff();
      row = row.array().exp().matrix();
      row /= row.sum();
    }
    context.middleCols(h * head_dim, head_dim) = scores * vh;
  }
  RowMatrixF attended = Apply(w.attention_output, context) + x;
  LayerNormRows(attended, w.attention_norm, config_.layer_norm_eps);

  RowMatrixF inner = Apply(w.ffn_in, attended);
  Activate(inner, config_.activation);
  RowMatrixF out = Apply(w.ffn_out, inner) + attended;
  LayerNormRows(out, w.ffn_norm, config_.layer_norm_eps);
  return out;
}

std::vector<RowMatrixF> TransformerModel::Forward(const std::vector<int>& ids) const {
  const auto seq = static_cast<Eigen::Index>(ids.size());
  if (seq == 0 || seq > config_.max_positions) {
    throw StageError("encoder input length " + std::to_string(seq) +
                     " outside [1, " + std::to_string(config_.max_positions) + "]");
  }
  RowMatrixF x(seq, config_.hidden_size);
  for (Eigen::Index i = 0; i < seq; ++i) {
    const int id = ids[static_cast<size_t>(i)];
    if (id < 0 || id >= config_.vocab_size) {
      throw StageError("token id " + std::to_string(id) + " outside vocabulary");
    }
    x.row(i) = weights_.word_embeddings.row(id) +
               weights_.position_embeddings.row(i) +
               weights_.token_type_embeddings.row(0);
  }
  LayerNormRows(x, weights_.embedding_norm, config_.layer_norm_eps);

  std::vector<RowMatrixF> states;
  states.reserve(weights_.blocks.size() + 1);
  states.push_back(x);
  for (const auto& block : weights_.blocks) {
    states.push_back(Block(block, states.back()));
  }
  return states;
}

}  // namespace psd
