#pragma once

#include <cstdint>

namespace dvi {

// Counter-based deterministic generator: the stream is a pure function of
// (seed, counter), so identical seeds always yield identical streams and a
// state can be copied or checkpointed freely.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    // splitmix64 applied to the (seed, counter) pair
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (++counter_);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in (0, 1)
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; two uniforms per draw, no cached spare
  double normal();

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace dvi
