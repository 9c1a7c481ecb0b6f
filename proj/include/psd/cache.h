#ifndef PSD_CACHE_H_
#define PSD_CACHE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psd/corpus.h"
#include "psd/encoder.h"

namespace psd {

// Keyed binary store of LayerMatrix values. Key = instance_id + ":" +
// encoder_fingerprint. Each value is a file holding the header
// {"PSDL", u32 version, u32 rows, u32 cols} followed by rows*cols
// little-endian f32 in row-major order. Writes go through a temporary file
// and rename, so concurrent readers never see partial values; there must be
// a single writer.
class CacheStore {
 public:
  explicit CacheStore(std::filesystem::path root);

  static std::string Key(const std::string& instance_id,
                         const std::string& fingerprint);

  bool Contains(const std::string& instance_id,
                const std::string& fingerprint) const;
  std::optional<LayerMatrix> Get(const std::string& instance_id,
                                 const std::string& fingerprint) const;
  void Put(const LayerMatrix& matrix);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path PathFor(const std::string& instance_id,
                                const std::string& fingerprint) const;

  // Fingerprints that have at least one cached value.
  std::vector<std::string> Fingerprints() const;

 private:
  std::filesystem::path root_;
};

struct CacheReport {
  size_t computed = 0;
  size_t skipped = 0;
  std::vector<std::pair<std::string, std::string>> failed;  // id, reason
  double seconds = 0.0;

  nlohmann::json ToJson() const;
};

// Ensures every instance has a cached LayerMatrix under the encoder's
// fingerprint. Per-instance failures are collected, not thrown.
CacheReport EncodeCorpus(Encoder& encoder, const Dataset& dataset,
                         CacheStore& cache, bool verbose = false);

}  // namespace psd

#endif  // PSD_CACHE_H_
