#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bvecchia/batched.hpp"
#include "bvecchia/kernels.hpp"
#include "bvecchia/linalg.hpp"
#include "bvecchia/spatial.hpp"

namespace bvecchia {

struct PlanConfig {
  std::size_t bc = 1;  // block count
  std::size_t cs = 0;  // conditioning size
  Ordering ordering = Ordering::random;
  std::uint64_t seed = 0;
  std::size_t kmeans_max_iter = 100;
};

// Wall-clock seconds spent in each preprocessing phase of build_plan.
struct PlanTimings {
  double clustering = 0;
  double ordering = 0;
  double neighbors = 0;
};

// Frozen structure of a block Vecchia approximation. Covariances are not
// stored: they are rebuilt for every parameter value.
struct VecchiaPlan {
  LocationSet points;
  BlockPartition partition;
  BlockPermutation perm;
  NeighborSets neighbors;
  std::size_t cs = 0;

  std::size_t size() const noexcept { return points.size(); }
  std::size_t block_count() const noexcept { return partition.block_count(); }
  // Point indices of the block at permuted position `pos`.
  const std::vector<std::size_t>& block_at(std::size_t pos) const noexcept {
    return partition.blocks[perm.order[pos]];
  }
};

// Clusters, orders and selects neighbors; deterministic for a fixed config.
VecchiaPlan build_plan(const LocationSet& points, const PlanConfig& config,
                       PlanTimings* timings = nullptr, Parallelism parallelism = {});

// Assembles a plan from a caller-chosen partition and permutation.
VecchiaPlan make_plan(const LocationSet& points, BlockPartition partition,
                      BlockPermutation perm, std::size_t cs, Parallelism parallelism = {});

// Per-block matrices and vectors for one permuted position:
//   lk    = K(block, block)       l x l
//   con   = K(neighbors, neighbors) m x m
//   cross = K(neighbors, block)   m x l
struct BlockWorkspace {
  DenseMatrix lk;
  DenseMatrix con;
  DenseMatrix cross;
  std::vector<double> y_block;
  std::vector<double> y_neighbors;
};

BlockWorkspace assemble_workspace(const VecchiaPlan& plan, std::span<const double> y,
                                  const MaternKernel& kernel, std::size_t pos);
BlockWorkspace assemble_workspace(const VecchiaPlan& plan, std::span<const double> y,
                                  const MaternParams& theta, std::size_t pos);

// Gaussian conditional of a block given its neighbors.
struct BlockConditional {
  std::vector<double> mean;  // cross^T con^{-1} y_neighbors
  DenseMatrix cov;           // lk - cross^T con^{-1} cross
  int jitter_events = 0;
};

// Computes the conditional through L = chol(con), W = L^{-1} cross,
// z = L^{-1} y_neighbors. An empty neighbor set returns (0, lk).
BlockConditional condition_block(const BlockWorkspace& ws, double base_scale,
                                 std::size_t block_id);

struct LogLikResult {
  double loglik = 0;
  std::vector<double> per_block;  // indexed by permuted position
  int jitter_events = 0;
};

// Block Vecchia log-likelihood. Blocks run as one batch; contributions are
// summed in permuted order. NotPositiveDefinite names the permuted position.
LogLikResult block_loglik(const VecchiaPlan& plan, std::span<const double> y,
                          const MaternParams& theta, Parallelism parallelism = {});

inline constexpr std::size_t kDenseGuard = 4096;

// Dense precision matrix of the approximate joint density, together with
// its log-determinant -sum_i log|D_i| (D_i the block conditional covariances).
struct ImpliedPrecision {
  DenseMatrix precision;
  double log_det = 0;
};

// Throws InvalidArgument when n exceeds kDenseGuard.
ImpliedPrecision implied_precision(const VecchiaPlan& plan, const MaternParams& theta,
                                   Parallelism parallelism = {});

// Memory (bytes, 8-byte doubles) and flop models for block and classic Vecchia.
struct ComplexityEstimate {
  double memory_bytes_block = 0;
  double memory_bytes_classic = 0;
  double flops_block = 0;
  double flops_classic = 0;
};

ComplexityEstimate complexity_estimate(std::size_t n, std::size_t bc, std::size_t m);

}  // namespace bvecchia
