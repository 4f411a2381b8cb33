#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bvecchia/batched.hpp"
#include "bvecchia/kernels.hpp"
#include "bvecchia/linalg.hpp"
#include "bvecchia/spatial.hpp"
#include "bvecchia/vecchia.hpp"

namespace bvecchia {

struct FitOptions {
  double tol = 1e-7;
  std::size_t max_evals = 2000;
  // Parameters held at their initial value are marked false (sigma2, beta, nu).
  std::array<bool, 3> free{true, true, true};
  bool record_trace = false;
  Parallelism parallelism;
};

struct TracePoint {
  MaternParams theta;
  double loglik;
};

struct EstimationResult {
  MaternParams theta_hat;
  double loglik_at_opt = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
  PlanTimings plan_timings;
  double optimization_seconds = 0;
};

// Maximizes the block Vecchia log-likelihood over the free parameters inside
// `bounds`. The plan is built once and reused for every evaluation.
EstimationResult fit_mle(const LocationSet& points, std::span<const double> y,
                         const PlanConfig& config, const MaternParams& theta_init,
                         const ParamBounds& bounds = {}, const FitOptions& options = {});
EstimationResult fit_mle(const VecchiaPlan& plan, std::span<const double> y,
                         const MaternParams& theta_init, const ParamBounds& bounds = {},
                         const FitOptions& options = {});

struct TwoStageResult {
  EstimationResult coarse;
  EstimationResult fine;
};

// Fits a cheap configuration first, then the target configuration starting
// from the coarse estimate.
TwoStageResult fit_two_stage(const LocationSet& points, std::span<const double> y,
                             const PlanConfig& coarse, const PlanConfig& fine,
                             const MaternParams& theta_init, const ParamBounds& bounds = {},
                             const FitOptions& options = {});

struct PredictionResult {
  std::vector<double> y_star;           // predictive mean per new location
  std::vector<DenseMatrix> block_covs;  // conditional covariance per block id
  std::vector<double> sd;               // sqrt of the block covariance diagonals
  BlockPartition blocks;                // partition of the new locations
  std::vector<std::vector<std::size_t>> neighbors;  // training indices per block id
  int jitter_events = 0;
};

// One prediction block per ten new locations (at least one).
std::size_t default_prediction_blocks(std::size_t n_new) noexcept;

// Clusters the new locations into bc blocks and conditions each block on the
// cs training points nearest its centroid. Negative variances left by
// rounding are clamped to zero on the covariance diagonal.
PredictionResult predict_blocks(const LocationSet& train, std::span<const double> y,
                                const MaternParams& theta, const LocationSet& new_points,
                                std::size_t bc, std::size_t cs, std::uint64_t seed,
                                Parallelism parallelism = {});

enum class SimulationMode { univariate, joint };

struct IntervalSet {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> sim_mean;  // sample mean of the draws per location
  std::vector<double> sim_sd;    // sample standard deviation per location
  double alpha = 0.05;
  double z = 0;
};

// z such that P(|Z| > z) = alpha for a standard normal Z.
double two_sided_critical_value(double alpha);

// Draws `rounds` values per location from the predictive distribution and
// forms (mean - z sd, mean + z sd) from the sample moments. Univariate draws
// use substream i for location i; joint draws use substream b for block b.
IntervalSet conditional_simulate(const PredictionResult& pred, std::size_t rounds,
                                 std::uint64_t seed, double alpha = 0.05,
                                 SimulationMode mode = SimulationMode::univariate,
                                 Parallelism parallelism = {});

struct Metrics {
  double mspe = 0;
  double mape = 0;
  double picp = 0;
  double mpiw = 0;
};

Metrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                        const IntervalSet& intervals);

struct TrainTestSplit {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// Seeded random split keeping round(train_frac * n) points for training.
// Both parts must be non-empty.
TrainTestSplit train_test_split(std::size_t n, double train_frac, std::uint64_t seed);

}  // namespace bvecchia
