#include "psd/encoder.h"

#include <filesystem>

#include "psd/errors.h"
#include "psd/native_encoder.h"
#include "psd/worker_encoder.h"

namespace psd {

PieceWindow CenteredWindow(size_t total_pieces, size_t head_begin,
                           size_t head_end, size_t budget) {
  if (head_begin >= head_end || head_end > total_pieces) {
    throw StageError("head pieces outside the piece sequence");
  }
  const size_t head_len = head_end - head_begin;
  if (head_len > budget) {
    throw StageError("head needs " + std::to_string(head_len) +
                     " pieces but the window holds " + std::to_string(budget));
  }
  if (total_pieces <= budget) return {0, total_pieces};
  const size_t spare = budget - head_len;
  size_t left = spare / 2;
  size_t right = spare - left;
  const size_t avail_left = head_begin;
  const size_t avail_right = total_pieces - head_end;
  if (avail_left < left) {
    right += left - avail_left;
    left = avail_left;
  }
  if (avail_right < right) {
    left += right - avail_right;
    right = avail_right;
  }
  return {head_begin - left, head_end + right};
}

std::unique_ptr<Encoder> OpenEncoder(const std::string& spec,
                                     const EncoderOptions& options) {
  if (spec.starts_with("worker:")) {
    return std::make_unique<WorkerEncoder>(DefaultWorkerCommand(spec.substr(7)),
                                           options.max_tokens);
  }
  const std::string dir = spec.starts_with("native:") ? spec.substr(7) : spec;
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("encoder directory " + dir + " does not exist");
  }
  return NativeEncoder::Load(dir, options.max_tokens);
}

}  // namespace psd
