#ifndef PSD_TRANSFORMER_H_
#define PSD_TRANSFORMER_H_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace psd {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;

// Post-LayerNorm BERT-family encoder configuration.
struct TransformerConfig {
  std::string model_id = "bert";
  int vocab_size = 0;
  int hidden_size = 0;
  int num_layers = 0;
  int num_heads = 0;
  int intermediate_size = 0;
  int max_positions = 512;
  int type_vocab_size = 2;
  float layer_norm_eps = 1e-12f;
  std::string activation = "gelu";  // gelu | gelu_new | relu
  bool lowercase = true;

  nlohmann::json ToJson() const;
  static TransformerConfig FromJson(const nlohmann::json& j);
  // Throws ValidationError on inconsistent sizes.
  void Validate() const;
};

struct LayerNormWeights {
  VectorF gamma;
  VectorF beta;
};

// Dense layer stored as (out x in), matching the usual checkpoint layout.
struct LinearWeights {
  RowMatrixF weight;
  VectorF bias;
};

struct TransformerBlockWeights {
  LinearWeights query;
  LinearWeights key;
  LinearWeights value;
  LinearWeights attention_output;
  LayerNormWeights attention_norm;
  LinearWeights ffn_in;
  LinearWeights ffn_out;
  LayerNormWeights ffn_norm;
};

struct TransformerWeights {
  RowMatrixF word_embeddings;
  RowMatrixF position_embeddings;
  RowMatrixF token_type_embeddings;
  LayerNormWeights embedding_norm;
  std::vector<TransformerBlockWeights> blocks;

  // Small-normal (std 0.02) dense weights, unit LayerNorm, zero biases.
  static TransformerWeights Random(const TransformerConfig& config,
                                   uint64_t seed);

  // Canonical little-endian byte serialization (also the fingerprint input):
  // "PSDW", u32 version, u64 header length, JSON tensor table, f32 data.
  std::string Serialize() const;
  static TransformerWeights Deserialize(const std::string& bytes,
                                        const TransformerConfig& config);
};

// Inference-only forward pass. Returns hidden_states[0..num_layers], each
// seq_len x hidden_size: index 0 is the embedding output, index j the output
// of block j.
class TransformerModel {
 public:
  TransformerModel(TransformerConfig config, TransformerWeights weights);

  std::vector<RowMatrixF> Forward(const std::vector<int>& ids) const;

  const TransformerConfig& config() const { return config_; }
  const TransformerWeights& weights() const { return weights_; }

 private:
  RowMatrixF Block(const TransformerBlockWeights& w, const RowMatrixF& x) const;

  TransformerConfig config_;
  TransformerWeights weights_;
};

}  // namespace psd

#endif  // PSD_TRANSFORMER_H_
