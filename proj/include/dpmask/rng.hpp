#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dpmask {

// SplitMix64 finalizer; used to derive stream keys from (seed, index) pairs.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic random stream addressed by a 64-bit master seed plus a
// stream index. substream(i) derives a child stream from the stream's key
// alone (it does not consume state), so a fixed (seed, index) path always
// names the same stream regardless of draw order. All draws go through
// explicit bit-to-double conversions, so sequences are identical across
// platforms and standard-library implementations.
class RngStream {
 public:
  explicit RngStream(uint64_t master_seed, uint64_t stream_index = 0)
      : key_(derive(master_seed, stream_index)), gen_(key_) {}

  RngStream substream(uint64_t index) const { return RngStream(key_, index); }

  uint64_t key() const { return key_; }

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; caches the paired deviate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  static uint64_t derive(uint64_t seed, uint64_t index) {
    return splitmix64(seed ^ splitmix64(index ^ 0xD1B54A32D192ED03ull));
  }

  uint64_t key_;
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace dpmask
