#include "fbench/util/rng.hpp"

#include <string>

#include "fbench/util/hash.hpp"

namespace fbench {

std::uint64_t Rng::below(std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  return lo + static_cast<std::int64_t>(below(span));
}

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

bool Rng::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01() < p;
}

Rng Rng::fork(std::string_view label) const { return Rng(derive_seed(seed_, label)); }

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::string key = std::to_string(seed);
  key += '/';
  key += label;
  return hash::sha256_u64(key);
}

}  // namespace fbench
