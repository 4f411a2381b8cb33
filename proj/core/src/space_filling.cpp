#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "bvecchia/error.hpp"
#include "bvecchia/spatial.hpp"

namespace bvecchia {

namespace {

std::uint64_t quantize(double x, std::uint32_t bits) {
  const double clamped = std::isnan(x) ? 0.0 : std::clamp(x, 0.0, 1.0);
  const double top = static_cast<double>((std::uint64_t{1} << bits) - 1);
  return static_cast<std::uint64_t>(std::floor(clamped * top + 0.5));
}

std::uint64_t morton_key(std::span<const std::uint64_t> q, std::uint32_t bits) {
  const std::size_t d = q.size();
  std::uint64_t key = 0;
  for (std::uint32_t b = 0; b < bits; ++b) {
    for (std::size_t k = 0; k < d; ++k) {
      key |= ((q[k] >> b) & 1ULL) << (b * d + k);
    }
  }
  return key;
}

// Skilling's transpose form of the d-dimensional Hilbert index, then read out
// level by level with axis 0 as the most significant bit of each level.
std::uint64_t hilbert_key(std::span<std::uint64_t> x, std::uint32_t bits) {
  const std::size_t d = x.size();
  const std::uint64_t top = std::uint64_t{1} << (bits - 1);

  for (std::uint64_t q = top; q > 1; q >>= 1) {
    const std::uint64_t p = q - 1;
    for (std::size_t i = 0; i < d; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        const std::uint64_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  for (std::size_t i = 1; i < d; ++i) x[i] ^= x[i - 1];
  std::uint64_t t = 0;
  for (std::uint64_t q = top; q > 1; q >>= 1) {
    if (x[d - 1] & q) t ^= q - 1;
  }
  for (std::size_t i = 0; i < d; ++i) x[i] ^= t;

  std::uint64_t key = 0;
  for (std::uint32_t b = bits; b-- > 0;) {
    for (std::size_t i = 0; i < d; ++i) key = (key << 1) | ((x[i] >> b) & 1ULL);
  }
  return key;
}

}  // namespace

std::uint32_t default_curve_bits(std::size_t dim) noexcept { return dim <= 2 ? 16 : 10; }

std::uint64_t space_fill_key(std::span<const double> point, Ordering strategy,
                             std::uint32_t bits_per_dim) {
  const std::size_t d = point.size();
  if (d == 0 || d > 3) throw InvalidArgument("space_fill_key: dimension must be 1, 2 or 3");
  if (bits_per_dim == 0 || bits_per_dim * d > 63) {
    throw InvalidArgument("space_fill_key: bits_per_dim * dim must be in [1, 63]");
  }
  std::array<std::uint64_t, 3> q{};
  for (std::size_t k = 0; k < d; ++k) q[k] = quantize(point[k], bits_per_dim);

  switch (strategy) {
    case Ordering::morton:
      return morton_key(std::span<const std::uint64_t>(q.data(), d), bits_per_dim);
    case Ordering::hilbert:
      return hilbert_key(std::span<std::uint64_t>(q.data(), d), bits_per_dim);
    default:
      throw InvalidArgument("space_fill_key: strategy must be morton or hilbert, got " +
                            std::string(to_string(strategy)));
  }
}

}  // namespace bvecchia
