#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

namespace bvecchia {

// Counter-based generator: output k of stream s under seed is
// splitmix64_mix(key(seed, s) + k * golden). Any (seed, stream, k) triple is
// reproducible on every platform, which the seeded substreams rely on.
//
// Normal variates use the polar-free Box-Muller transform and return both
// values of each pair in order (cos branch first).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform on (0, 1).
  double uniform_open() noexcept;
  double normal() noexcept;
  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

}  // namespace bvecchia
