#include "psd/rng.h"

#include <limits>

namespace psd {

uint64_t Rng::Below(uint64_t bound) {
  if (bound <= 1) return 0;
  const uint64_t limit =
      std::numeric_limits<uint64_t>::max() -
      std::numeric_limits<uint64_t>::max() % bound;
  uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % bound;
}

}  // namespace psd
