#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bvecchia/batched.hpp"

namespace bvecchia {

// n points in d = 2 or 3 dimensions, stored row-major. Coordinates are
// expected in the unit cube but only finiteness is enforced.
class LocationSet {
 public:
  LocationSet() = default;
  // coords.size() must be a positive multiple of dim.
  LocationSet(std::vector<double> coords, std::size_t dim);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> point(std::size_t i) const noexcept {
    return {coords_.data() + i * dim_, dim_};
  }
  double operator()(std::size_t i, std::size_t k) const noexcept { return coords_[i * dim_ + k]; }
  std::span<const double> coords() const noexcept { return coords_; }

  LocationSet subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const LocationSet&, const LocationSet&) = default;

 private:
  std::vector<double> coords_;
  std::size_t dim_ = 0;
};

// n uniform points in [0,1]^dim from the seeded counter generator.
LocationSet uniform_locations(std::size_t n, std::size_t dim, std::uint64_t seed);
// side^dim regular grid with cell-centred coordinates (i + 0.5) / side.
LocationSet grid_locations(std::size_t side, std::size_t dim);

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

struct BlockPartition {
  std::size_t dim = 0;
  std::vector<std::size_t> assignment;           // point -> block id
  std::vector<std::vector<std::size_t>> blocks;  // block id -> ascending point indices
  std::vector<double> centroids;                 // block_count x dim, row-major

  std::size_t block_count() const noexcept { return blocks.size(); }
  std::size_t block_size(std::size_t b) const noexcept { return blocks[b].size(); }
  std::span<const double> centroid(std::size_t b) const noexcept {
    return {centroids.data() + b * dim, dim};
  }

  // Builds blocks and coordinate-mean centroids from an assignment vector.
  // Throws InvalidArgument if any block id in [0, bc) is unused.
  static BlockPartition from_assignment(const LocationSet& points,
                                        std::vector<std::size_t> assignment, std::size_t bc);

  friend bool operator==(const BlockPartition&, const BlockPartition&) = default;
};

struct KMeansOptions {
  std::size_t max_iter = 100;
  // Receives the k-means objective after every centroid update when set.
  std::vector<double>* objective_trace = nullptr;
};

// Lloyd's algorithm with k-means++ seeding. Ties go to the lower block id,
// empty clusters take the point farthest from its centroid.
BlockPartition kmeans_cluster(const LocationSet& points, std::size_t bc, std::uint64_t seed,
                              const KMeansOptions& options = {});

double kmeans_objective(const LocationSet& points, const BlockPartition& partition);

enum class Ordering { morton, hilbert, random, maxmin, kdtree };

std::string_view to_string(Ordering ordering) noexcept;
// Throws InvalidArgument for unknown names.
Ordering parse_ordering(std::string_view name);

struct BlockPermutation {
  std::vector<std::size_t> order;  // permuted position -> block id
  Ordering strategy = Ordering::random;
  std::uint64_t seed = 0;

  friend bool operator==(const BlockPermutation&, const BlockPermutation&) = default;
};

BlockPermutation order_blocks(const BlockPartition& partition, Ordering strategy,
                              std::uint64_t seed);

// Bits per dimension used when ordering centroids along a space-filling curve.
std::uint32_t default_curve_bits(std::size_t dim) noexcept;

// Quantizes x in [0,1]^d to round(x * (2^bits - 1)) (out-of-range values are
// clamped) and returns the Morton or Hilbert index of the cell.
// strategy must be morton or hilbert; bits * d must not exceed 63.
std::uint64_t space_fill_key(std::span<const double> point, Ordering strategy,
                             std::uint32_t bits_per_dim);

struct NeighborSets {
  std::size_t cs = 0;
  // Permuted position -> global point indices, nearest first. Position 0 is empty.
  std::vector<std::vector<std::size_t>> sets;

  const std::vector<std::size_t>& operator[](std::size_t position) const noexcept {
    return sets[position];
  }
  friend bool operator==(const NeighborSets&, const NeighborSets&) = default;
};

// For each permuted position i >= 1, the min(cs, available) points of earlier
// blocks closest to block i's centroid (ties to the smaller point index).
NeighborSets neighbor_sets(const LocationSet& points, const BlockPartition& partition,
                           const BlockPermutation& perm, std::size_t cs,
                           Parallelism parallelism = {});

// The k points of `candidates` nearest to `target`, sorted by (distance, index).
std::vector<std::size_t> nearest_points(const LocationSet& points,
                                        std::span<const std::size_t> candidates,
                                        std::span<const double> target, std::size_t k);

}  // namespace bvecchia
