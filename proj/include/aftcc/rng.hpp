// Counter-based random streams.
//
// A stream is identified by a 64-bit key derived from (master seed, stream
// index); the i-th draw is a bijective mix of (key, i). Streams are cheap to
// create, independent of thread scheduling, and reproduce bit-for-bit on
// any platform with IEEE doubles.
#pragma once

#include <cstdint>
#include <limits>

namespace aftcc {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t stream) noexcept {
  return mix64(mix64(master_seed ^ 0x6a09e667f3bcc909ULL) + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t master_seed, std::uint64_t stream) noexcept : key_(stream_key(master_seed, stream)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    // Two rounds so that neighbouring counters decorrelate fully.
    return mix64(mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_) ^ key_);
  }

  // Uniform on the open interval (0, 1); 53-bit resolution.
  double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace aftcc
