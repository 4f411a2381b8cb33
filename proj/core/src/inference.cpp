#include "bvecchia/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "bvecchia/error.hpp"
#include "bvecchia/optimize.hpp"
#include "bvecchia/random.hpp"

namespace bvecchia {

namespace {

constexpr std::uint64_t kSplitStream = 5;
constexpr std::uint64_t kSimulationSalt = 0x243f6a8885a308d3ULL;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

EstimationResult fit_mle(const VecchiaPlan& plan, std::span<const double> y,
                         const MaternParams& theta_init, const ParamBounds& bounds,
                         const FitOptions& options) {
  bounds.validate();
  theta_init.validate();
  if (!bounds.contains(theta_init)) throw InvalidArgument("fit_mle: theta_init lies outside the bounds");
  if (y.size() != plan.size()) throw InvalidArgument("fit_mle: y must have length n");
  if (!(options.tol > 0.0)) throw InvalidArgument("fit_mle: tol must be positive");

  const auto init = theta_init.as_array();
  const auto lo = bounds.lower.as_array();
  const auto hi = bounds.upper.as_array();
  std::vector<std::size_t> free_idx;
  for (std::size_t k = 0; k < 3; ++k) {
    if (options.free[k]) free_idx.push_back(k);
  }
  if (free_idx.empty()) throw InvalidArgument("fit_mle: no free parameters");

  std::vector<double> x0, lower, upper;
  for (std::size_t k : free_idx) {
    x0.push_back(init[k]);
    lower.push_back(lo[k]);
    upper.push_back(hi[k]);
  }
  auto to_theta = [&](std::span<const double> x) {
    auto v = init;
    for (std::size_t j = 0; j < free_idx.size(); ++j) v[free_idx[j]] = x[j];
    return MaternParams::from_array(v);
  };

  EstimationResult result;
  const Objective objective = [&](std::span<const double> x) {
    const MaternParams theta = to_theta(x);
    double ll = -std::numeric_limits<double>::infinity();
    try {
      ll = block_loglik(plan, y, theta, options.parallelism).loglik;
    } catch (...) {
      // Failed evaluations are traced too, so the trace matches the evaluation count.
      if (options.record_trace) result.trace.push_back({theta, ll});
      throw;
    }
    if (options.record_trace) result.trace.push_back({theta, ll});
    return -ll;
  };

  NelderMeadOptions nm;
  nm.ftol = options.tol;
  nm.max_evals = options.max_evals;
  const auto t0 = std::chrono::steady_clock::now();
  const NelderMeadResult opt = nelder_mead_box(objective, x0, lower, upper, nm);
  result.optimization_seconds = seconds_since(t0);

  result.theta_hat = to_theta(opt.x);
  result.loglik_at_opt = -opt.f;
  result.evaluations = opt.evaluations;
  result.converged = opt.converged;
  return result;
}

EstimationResult fit_mle(const LocationSet& points, std::span<const double> y,
                         const PlanConfig& config, const MaternParams& theta_init,
                         const ParamBounds& bounds, const FitOptions& options) {
  if (y.size() != points.size()) throw InvalidArgument("fit_mle: y must have length n");
  PlanTimings timings;
  const VecchiaPlan plan = build_plan(points, config, &timings, options.parallelism);
  EstimationResult result = fit_mle(plan, y, theta_init, bounds, options);
  result.plan_timings = timings;
  return result;
}

TwoStageResult fit_two_stage(const LocationSet& points, std::span<const double> y,
                             const PlanConfig& coarse, const PlanConfig& fine,
                             const MaternParams& theta_init, const ParamBounds& bounds,
                             const FitOptions& options) {
  TwoStageResult out;
  out.coarse = fit_mle(points, y, coarse, theta_init, bounds, options);
  out.fine = fit_mle(points, y, fine, out.coarse.theta_hat, bounds, options);
  return out;
}

std::size_t default_prediction_blocks(std::size_t n_new) noexcept {
  return std::max<std::size_t>(1, n_new / 10);
}

PredictionResult predict_blocks(const LocationSet& train, std::span<const double> y,
                                const MaternParams& theta, const LocationSet& new_points,
                                std::size_t bc, std::size_t cs, std::uint64_t seed,
                                Parallelism parallelism) {
  theta.validate();
  if (y.size() != train.size()) throw InvalidArgument("predict_blocks: y must have length n");
  if (train.dim() != new_points.dim()) throw InvalidArgument("predict_blocks: dimension mismatch");
  if (cs > train.size()) throw InvalidArgument("predict_blocks: cs exceeds the training size");
  if (bc == 0 || bc > new_points.size()) {
    throw InvalidArgument("predict_blocks: need 1 <= bc <= number of new locations");
  }

  const MaternKernel kernel(theta, MaternKernel::Mode::tabulated);
  PredictionResult out;
  out.blocks = kmeans_cluster(new_points, bc, seed);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  struct BlockPrediction {
    std::vector<std::size_t> neighbors;
    BlockConditional cond;
  };
  auto outcome = batched_apply(
      bc,
      [&](std::size_t b) {
        const auto& block = out.blocks.blocks[b];
        BlockPrediction bp;
        bp.neighbors = nearest_points(train, all, out.blocks.centroid(b), cs);
        BlockWorkspace ws;
        ws.lk = cov_matrix(kernel, new_points, block);
        if (!bp.neighbors.empty()) {
          ws.con = cov_matrix(kernel, train, bp.neighbors);
          ws.cross = cross_cov(kernel, train, bp.neighbors, new_points, block);
          for (std::size_t j : bp.neighbors) ws.y_neighbors.push_back(y[j]);
        }
        bp.cond = condition_block(ws, theta.sigma2, b);
        for (std::size_t i = 0; i < block.size(); ++i) {
          bp.cond.cov(i, i) = std::max(bp.cond.cov(i, i), 0.0);
        }
        return bp;
      },
      parallelism);
  auto parts = std::move(outcome).value_or_throw();

  const std::size_t m = new_points.size();
  out.y_star.assign(m, 0.0);
  out.sd.assign(m, 0.0);
  out.block_covs.reserve(bc);
  out.neighbors.reserve(bc);
  for (std::size_t b = 0; b < bc; ++b) {
    const auto& block = out.blocks.blocks[b];
    auto& bp = parts[b];
    for (std::size_t i = 0; i < block.size(); ++i) {
      out.y_star[block[i]] = bp.cond.mean[i];
      out.sd[block[i]] = std::sqrt(bp.cond.cov(i, i));
    }
    out.jitter_events += bp.cond.jitter_events;
    out.block_covs.push_back(std::move(bp.cond.cov));
    out.neighbors.push_back(std::move(bp.neighbors));
  }
  return out;
}

double two_sided_critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidArgument("two_sided_critical_value: alpha must lie in (0, 1)");
  }
  // Newton iteration on erfc(z / sqrt 2) = alpha.
  const double c = std::sqrt(2.0 / std::numbers::pi);
  double z = 1.5;
  for (int it = 0; it < 100; ++it) {
    const double g = std::erfc(z / std::numbers::sqrt2) - alpha;
    const double step = g / (c * std::exp(-0.5 * z * z));
    z = std::max(z + step, 0.5 * z);
    if (std::abs(step) < 1e-15 * std::max(1.0, z)) break;
  }
  return z;
}

namespace {

struct Welford {
  std::size_t count = 0;
  double mean = 0;
  double m2 = 0;

  void add(double x) noexcept {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  double sd() const noexcept {
    return count < 2 ? 0.0 : std::sqrt(std::max(m2, 0.0) / static_cast<double>(count - 1));
  }
};

}  // namespace

IntervalSet conditional_simulate(const PredictionResult& pred, std::size_t rounds,
                                 std::uint64_t seed, double alpha, SimulationMode mode,
                                 Parallelism parallelism) {
  if (rounds < 2) throw InvalidArgument("conditional_simulate: rounds must be at least 2");
  const std::size_t m = pred.y_star.size();
  if (pred.sd.size() != m) throw InvalidArgument("conditional_simulate: malformed prediction");

  IntervalSet out;
  out.alpha = alpha;
  out.z = two_sided_critical_value(alpha);
  out.sim_mean.assign(m, 0.0);
  out.sim_sd.assign(m, 0.0);
  const std::uint64_t sim_seed = splitmix64_mix(seed ^ kSimulationSalt);

  if (mode == SimulationMode::univariate) {
    auto outcome = batched_apply(
        m,
        [&](std::size_t i) {
          CounterRng rng(sim_seed, i);
          Welford w;
          for (std::size_t r = 0; r < rounds; ++r) w.add(pred.y_star[i] + pred.sd[i] * rng.normal());
          return std::pair{w.mean, w.sd()};
        },
        parallelism);
    const auto moments = std::move(outcome).value_or_throw();
    for (std::size_t i = 0; i < m; ++i) {
      out.sim_mean[i] = moments[i].first;
      out.sim_sd[i] = moments[i].second;
    }
  } else {
    const std::size_t bc = pred.blocks.block_count();
    if (pred.block_covs.size() != bc) throw InvalidArgument("conditional_simulate: malformed prediction");
    auto outcome = batched_apply(
        bc,
        [&](std::size_t b) {
          const auto& block = pred.blocks.blocks[b];
          const DenseMatrix& cov = pred.block_covs[b];
          double scale = 0.0;
          for (std::size_t i = 0; i < block.size(); ++i) scale = std::max(scale, cov(i, i));
          const CholeskyFactor l = cholesky(cov, scale > 0.0 ? scale : 1.0, b);
          CounterRng rng(sim_seed, b);
          std::vector<Welford> w(block.size());
          std::vector<double> z(block.size());
          for (std::size_t r = 0; r < rounds; ++r) {
            for (double& v : z) v = rng.normal();
            for (std::size_t i = 0; i < block.size(); ++i) {
              const double draw =
                  dot(l.lower.row(i).first(i + 1), std::span<const double>(z).first(i + 1));
              w[i].add(pred.y_star[block[i]] + draw);
            }
          }
          return w;
        },
        parallelism);
    const auto per_block = std::move(outcome).value_or_throw();
    for (std::size_t b = 0; b < bc; ++b) {
      const auto& block = pred.blocks.blocks[b];
      for (std::size_t i = 0; i < block.size(); ++i) {
        out.sim_mean[block[i]] = per_block[b][i].mean;
        out.sim_sd[block[i]] = per_block[b][i].sd();
      }
    }
  }

  out.lower.resize(m);
  out.upper.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.lower[i] = out.sim_mean[i] - out.z * out.sim_sd[i];
    out.upper[i] = out.sim_mean[i] + out.z * out.sim_sd[i];
  }
  return out;
}

Metrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                        const IntervalSet& intervals) {
  const std::size_t n = y_true.size();
  if (y_pred.size() != n || intervals.lower.size() != n || intervals.upper.size() != n) {
    throw InvalidArgument("compute_metrics: all inputs must have the same length");
  }
  if (n == 0) throw InvalidArgument("compute_metrics: empty input");
  Metrics m;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y_true[i] - y_pred[i];
    m.mspe += e * e;
    m.mape += std::abs(e);
    if (y_true[i] >= intervals.lower[i] && y_true[i] <= intervals.upper[i]) ++covered;
    m.mpiw += intervals.upper[i] - intervals.lower[i];
  }
  const double nd = static_cast<double>(n);
  m.mspe /= nd;
  m.mape /= nd;
  m.mpiw /= nd;
  m.picp = static_cast<double>(covered) / nd;
  return m;
}

TrainTestSplit train_test_split(std::size_t n, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw InvalidArgument("train_test_split: train fraction must lie strictly between 0 and 1");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw InvalidArgument("train_test_split: both the training and test sets must be non-empty");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng rng(seed, kSplitStream);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  TrainTestSplit split;
  split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace bvecchia
