#include "psd/cache.h"

#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>

#include "psd/digest.h"
#include "psd/errors.h"

namespace psd {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'P', 'S', 'D', 'L'};
constexpr uint32_t kVersion = 1;

// Filesystem-safe, injective encoding of an instance id.
std::string EscapeId(const std::string& id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '.' || c == '-' || c == '_') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  // Keep names within common filesystem limits.
  if (out.size() > 180) out = "h-" + Sha256Hex(id);
  return out;
}

}  // namespace

CacheStore::CacheStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

std::string CacheStore::Key(const std::string& instance_id,
                            const std::string& fingerprint) {
  return instance_id + ":" + fingerprint;
}

fs::path CacheStore::PathFor(const std::string& instance_id,
                             const std::string& fingerprint) const {
  return root_ / fingerprint / (EscapeId(instance_id) + ".lm");
}

bool CacheStore::Contains(const std::string& instance_id,
                          const std::string& fingerprint) const {
  return fs::exists(PathFor(instance_id, fingerprint));
}

std::optional<LayerMatrix> CacheStore::Get(const std::string& instance_id,
                                           const std::string& fingerprint) const {
  const fs::path path = PathFor(instance_id, fingerprint);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  uint32_t version = 0;
  uint32_t rows = 0;
  uint32_t cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) {
    throw StageError("corrupt cache entry " + path.string());
  }
  LayerMatrix m;
  m.instance_id = instance_id;
  m.encoder_fingerprint = fingerprint;
  m.values.resize(rows, cols);
  in.read(reinterpret_cast<char*>(m.values.data()),
          static_cast<std::streamsize>(rows) * cols * sizeof(float));
  if (!in) throw StageError("truncated cache entry " + path.string());
  return m;
}

void CacheStore::Put(const LayerMatrix& matrix) {
  const fs::path path = PathFor(matrix.instance_id, matrix.encoder_fingerprint);
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StageError("cannot write " + tmp.string());
    const auto rows = static_cast<uint32_t>(matrix.values.rows());
    const auto cols = static_cast<uint32_t>(matrix.values.cols());
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(matrix.values.data()),
              static_cast<std::streamsize>(rows) * cols * sizeof(float));
    if (!out) throw StageError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::string> CacheStore::Fingerprints() const {
  std::vector<std::string> out;
  if (!fs::exists(root_)) return out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json CacheReport::ToJson() const {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& [id, why] : failed) f.push_back({{"id", id}, {"error", why}});
  return {{"computed", computed},
          {"skipped", skipped},
          {"failed", f},
          {"seconds", seconds}};
}

CacheReport EncodeCorpus(Encoder& encoder, const Dataset& dataset,
                         CacheStore& cache, bool verbose) {
  const auto start = std::chrono::steady_clock::now();
  const std::string& fp = encoder.info().fingerprint;
  CacheReport report;
  size_t done = 0;
  for (const auto& inst : dataset.instances()) {
    ++done;
    if (cache.Contains(inst.id, fp)) {
      ++report.skipped;
      continue;
    }
    try {
      cache.Put(encoder.Encode(inst));
      ++report.computed;
    } catch (const std::exception& e) {
      report.failed.emplace_back(inst.id, e.what());
    }
    if (verbose && done % 500 == 0) {
      std::cerr << "embed: " << done << "/" << dataset.size() << '\n';
    }
  }
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

}  // namespace psd
