#ifndef PSD_WORKER_ENCODER_H_
#define PSD_WORKER_ENCODER_H_

#include <string>
#include <vector>

#include "psd/encoder.h"

namespace psd {

// Encoder living in a child process that speaks a line protocol on
// stdin/stdout (see tools/hf_encoder_worker.py):
//
//   worker -> {"model_id", "num_layers", "hidden_dim", "max_tokens",
//              "fingerprint"}                                (handshake)
//   host   -> {"op": "encode", "tokens": [..], "head": [s, e],
//              "max_tokens": N}
//   worker -> {"ok": true, "rows": R, "cols": D} + R*D little-endian f32
//          |  {"ok": false, "error": "..."}
//   host   -> {"op": "fingerprint"}
//   worker -> {"ok": true, "fingerprint": "..."}
class WorkerEncoder : public Encoder {
 public:
  // `argv[0]` is resolved through PATH.
  WorkerEncoder(std::vector<std::string> argv, int max_tokens = 0);
  ~WorkerEncoder() override;
  WorkerEncoder(const WorkerEncoder&) = delete;
  WorkerEncoder& operator=(const WorkerEncoder&) = delete;

  const EncoderInfo& info() const override { return info_; }
  LayerMatrix Encode(const LabeledInstance& instance) override;
  std::string ComputeFingerprint() override;

 private:
  void Send(const std::string& line);
  std::string ReadLine();
  void ReadExact(char* dst, size_t n);

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  EncoderInfo info_;
};

// Default worker command for a Hugging Face model name or path.
std::vector<std::string> DefaultWorkerCommand(const std::string& model);

}  // namespace psd

#endif  // PSD_WORKER_ENCODER_H_
