#include "lpsim/random.hpp"

#include <limits>

namespace lpsim {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(base);
  for (const std::uint64_t tag : tags) {
    h = mix64(h ^ mix64(tag + 0x632be59bd9b4e019ULL));
  }
  return h;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection on the top of the range keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return x % bound;
}

} // namespace lpsim
