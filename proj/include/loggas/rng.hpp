#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace loggas {

// SplitMix64 step. Used only to spread (master seed, stream id, purpose)
// triples into well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t purpose = 0) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= 0x632be59bd9b4e019ull * (stream + 1);
  std::uint64_t b = splitmix64(s);
  s ^= 0xd1342543de82ef95ull * (purpose + 1);
  std::uint64_t c = splitmix64(s);
  return a ^ (b << 1) ^ (c >> 1);
}

// Deterministic per-stream generator. The mapping (master, stream, purpose)
// -> draw sequence is fixed by this file alone: uniforms come from the top 53
// bits of the engine output and normals from the polar method, so results do
// not depend on standard-library distribution internals. Streams with equal
// master seed and distinct ids are decorrelated by the SplitMix64 spread.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t master, std::uint64_t stream = 0,
                     std::uint64_t purpose = 0)
      : engine_(derive_seed(master, stream, purpose)) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Integer uniform on [0, n) by rejection, exact for any n.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t v = engine_();
      if (v >= threshold) return v % n;
    }
  }

  // Standard normal via the polar (Marsaglia) method with one cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace loggas
