#ifndef PSD_NATIVE_ENCODER_H_
#define PSD_NATIVE_ENCODER_H_

#include <filesystem>
#include <vector>

#include "psd/encoder.h"
#include "psd/transformer.h"
#include "psd/wordpiece.h"

namespace psd {

// In-process WordPiece + post-LN transformer encoder (BERT, DistilBERT
// layouts). An encoder directory holds config.json, vocab.txt and
// weights.bin; tools/export_encoder.py writes one from a Hugging Face
// checkpoint.
class NativeEncoder : public Encoder {
 public:
  NativeEncoder(TransformerConfig config, TransformerWeights weights,
                WordPieceTokenizer tokenizer, int max_tokens = 0);

  static std::unique_ptr<NativeEncoder> Load(const std::filesystem::path& dir,
                                             int max_tokens = 0);
  void Save(const std::filesystem::path& dir) const;

  const EncoderInfo& info() const override { return info_; }
  LayerMatrix Encode(const LabeledInstance& instance) override;
  std::string ComputeFingerprint() override;

  // Per-piece hidden states for introspection: `states[j]` is seq x d for
  // layer j, and `head_positions` index the head pieces in the sequence.
  struct PieceStates {
    std::vector<int> ids;
    std::vector<size_t> head_positions;
    std::vector<RowMatrixF> states;
  };
  PieceStates EncodePieces(const LabeledInstance& instance) const;

  const TransformerModel& model() const { return model_; }

 private:
  TransformerModel model_;
  WordPieceTokenizer tokenizer_;
  EncoderInfo info_;
};

}  // namespace psd

#endif  // PSD_NATIVE_ENCODER_H_
