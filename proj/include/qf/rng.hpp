#pragma once
#include <cmath>
#include <cstdint>

namespace qf {

/// SplitMix64 finalizer.  Fixed published constants; part of the
/// reproducibility contract (seed streams are stable across releases).
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream seed for substream k of a master seed.  Pure 64-bit mixing, so the
/// value is identical on every platform and for every thread layout.
inline std::uint64_t stable_hash(std::uint64_t master_seed, std::uint64_t k) {
  return splitmix64_mix(master_seed ^ splitmix64_mix(k * 0x9E3779B97F4A7C15ULL +
                                                     0xD1B54A32D192ED03ULL));
}

/// Deterministic seed derivation: one independent stream per trajectory index.
struct SeedPolicy {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_seed(std::uint64_t k) const { return stable_hash(master_seed, k); }
};

/// Philox4x32-10 counter-based generator keyed by a 64-bit stream seed.
/// Output depends only on (seed, draw index): trajectories are bit-portable
/// across platforms and independent of scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t stream_seed)
      : key0_(static_cast<std::uint32_t>(stream_seed)),
        key1_(static_cast<std::uint32_t>(stream_seed >> 32)) {}

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) {
      philox_block();
      buf_pos_ = 0;
      if (++ctr0_ == 0) ++ctr1_;  // 128-bit counter, low word first
    }
    return buf_[buf_pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform on (0, 1]; never returns 0 so log() is safe.
  double uniform() {
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; draws two uniforms per pair.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  void philox_block() {
    std::uint32_t c0 = ctr0_lo(), c1 = ctr0_hi(), c2 = ctr1_lo(), c3 = ctr1_hi();
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = 0xD2511F53ULL * c0;
      std::uint64_t p1 = 0xCD9E8D57ULL * c2;
      std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += 0x9E3779B9U;
      k1 += 0xBB67AE85U;
    }
    buf_[0] = c0; buf_[1] = c1; buf_[2] = c2; buf_[3] = c3;
  }

  std::uint32_t ctr0_lo() const { return static_cast<std::uint32_t>(ctr0_); }
  std::uint32_t ctr0_hi() const { return static_cast<std::uint32_t>(ctr0_ >> 32); }
  std::uint32_t ctr1_lo() const { return static_cast<std::uint32_t>(ctr1_); }
  std::uint32_t ctr1_hi() const { return static_cast<std::uint32_t>(ctr1_ >> 32); }

  std::uint32_t key0_, key1_;
  std::uint64_t ctr0_ = 0, ctr1_ = 0;
  std::uint32_t buf_[4] = {};
  int buf_pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace qf
