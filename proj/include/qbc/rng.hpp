#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qbc {

namespace detail {

// SplitMix64 finalizer; used both to condition raw seeds and to derive
// per-trial streams in counter mode.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic random stream. Streams derived from the same master seed
/// with distinct indices are statistically independent; two RngStream
/// objects constructed with the same parameters produce identical draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(detail::mix64(seed)) {}

  /// Counter-mode derivation: stream for trial `index` under `master`.
  static RngStream derive(std::uint64_t master, std::uint64_t index) {
    std::uint64_t h = detail::mix64(master);
    h = detail::mix64(h ^ detail::mix64(index + 0x632be59bd9b4e019ull));
    RngStream s(0);
    s.gen_.seed(h);
    return s;
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    // modulo bias is negligible for desk-scale n; keep the draw count fixed
    return static_cast<std::size_t>(gen_() % n);
  }

  bool coin() { return (gen_() & 1ull) != 0; }

  /// Standard normal via polar Box-Muller (stateless between draws so that
  /// copies of a stream stay in lockstep).
  double normal() {
    for (;;) {
      double u = 2.0 * uniform() - 1.0;
      double v = 2.0 * uniform() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qbc
