#ifndef PSD_ENCODER_H_
#define PSD_ENCODER_H_

#include <memory>
#include <optional>
#include <string>

#include "psd/corpus.h"
#include "psd/transformer.h"

namespace psd {

// Description of a loaded frozen encoder.
struct EncoderInfo {
  std::string model_id;
  int num_layers = 0;  // H; a LayerMatrix has H + 1 rows
  int hidden_dim = 0;  // d
  int max_tokens = 0;  // subword budget including special tokens
  std::string fingerprint;
};

// Head representation at every layer for one instance. Row 0 is the
// embedding output, row j the output of transformer block j.
struct LayerMatrix {
  std::string instance_id;
  std::string encoder_fingerprint;
  RowMatrixF values;

  int num_rows() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
};

// Adapter over a frozen pre-trained encoder. Implementations must be
// deterministic: encoding the same instance twice is bit-identical.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual const EncoderInfo& info() const = 0;

  // Mean over the subword pieces of all head tokens, at every layer.
  // Throws StageError when the head maps to zero pieces or an activation is
  // not finite.
  virtual LayerMatrix Encode(const LabeledInstance& instance) = 0;

  // Recomputes the content digest of the live weights and config.
  virtual std::string ComputeFingerprint() = 0;
};

// Subword window [begin, end) of at most `budget` pieces that always contains
// the head pieces [head_begin, head_end) and is centered on them when the
// sequence is longer than the budget.
struct PieceWindow {
  size_t begin = 0;
  size_t end = 0;
};
PieceWindow CenteredWindow(size_t total_pieces, size_t head_begin,
                           size_t head_end, size_t budget);

struct EncoderOptions {
  // 0 keeps the encoder's own limit; otherwise clamps it.
  int max_tokens = 0;
};

// Opens an encoder from a spec string:
//   native:<dir>   in-process transformer exported into <dir>
//   worker:<model> Python worker process running a Hugging Face model
//   <dir>          same as native:<dir>
std::unique_ptr<Encoder> OpenEncoder(const std::string& spec,
                                     const EncoderOptions& options = {});

}  // namespace psd

#endif  // PSD_ENCODER_H_
