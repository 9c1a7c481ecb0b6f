#ifndef PSD_RNG_H_
#define PSD_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace psd {

// Seeded generator whose output sequence is identical on every platform.
// std::mt19937_64's raw stream is fully specified by the standard; the
// standard distributions and std::shuffle are not, so bounded integers and
// reals are derived here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  uint64_t Below(uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double UniformUnit() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * UniformUnit(); }

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(Below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace psd

#endif  // PSD_RNG_H_
