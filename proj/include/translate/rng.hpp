#pragma once

#include <cstdint>

namespace translate {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Counter-based generator: output k of a stream is mix64(key + k * golden),
// where the key is derived from (seed, stream, substream). Any replicate can
// therefore be regenerated from its indices alone, independent of how work
// is scheduled across threads.
//
// All samplers are implemented here rather than through <random>
// distributions so that draws are identical across standard libraries.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);
  double normal();
  double normal(double mean, double sd);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace translate
