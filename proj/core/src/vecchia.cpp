#include "bvecchia/vecchia.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "bvecchia/error.hpp"

namespace bvecchia {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

VecchiaPlan build_plan(const LocationSet& points, const PlanConfig& config, PlanTimings* timings,
                       Parallelism parallelism) {
  const std::size_t n = points.size();
  if (config.bc == 0 || config.bc > n) throw InvalidArgument("build_plan: need 1 <= bc <= n");

  auto t0 = std::chrono::steady_clock::now();
  KMeansOptions km;
  km.max_iter = config.kmeans_max_iter;
  BlockPartition partition = kmeans_cluster(points, config.bc, config.seed, km);
  const double t_cluster = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  BlockPermutation perm = order_blocks(partition, config.ordering, config.seed);
  const double t_order = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  VecchiaPlan plan = make_plan(points, std::move(partition), std::move(perm), config.cs, parallelism);
  const double t_nn = seconds_since(t0);

  if (timings) *timings = PlanTimings{t_cluster, t_order, t_nn};
  return plan;
}

VecchiaPlan make_plan(const LocationSet& points, BlockPartition partition,
                      BlockPermutation perm, std::size_t cs, Parallelism parallelism) {
  if (partition.assignment.size() != points.size()) {
    throw InvalidArgument("make_plan: partition does not match the point set");
  }
  std::vector<bool> seen(partition.block_count(), false);
  if (perm.order.size() != partition.block_count()) {
    throw InvalidArgument("make_plan: permutation length differs from the block count");
  }
  for (std::size_t b : perm.order) {
    if (b >= seen.size() || seen[b]) throw InvalidArgument("make_plan: order is not a permutation");
    seen[b] = true;
  }
  VecchiaPlan plan;
  plan.neighbors = neighbor_sets(points, partition, perm, cs, parallelism);
  plan.points = points;
  plan.partition = std::move(partition);
  plan.perm = std::move(perm);
  plan.cs = cs;
  return plan;
}

BlockWorkspace assemble_workspace(const VecchiaPlan& plan, std::span<const double> y,
                                  const MaternParams& theta, std::size_t pos) {
  return assemble_workspace(plan, y, MaternKernel(theta, MaternKernel::Mode::tabulated), pos);
}

BlockWorkspace assemble_workspace(const VecchiaPlan& plan, std::span<const double> y,
                                  const MaternKernel& kernel, std::size_t pos) {
  if (pos >= plan.block_count()) throw InvalidArgument("assemble_workspace: position out of range");
  if (!y.empty() && y.size() != plan.size()) {
    throw InvalidArgument("assemble_workspace: observation length must equal n");
  }
  const auto& block = plan.block_at(pos);
  const auto& nn = plan.neighbors[pos];
  BlockWorkspace ws;
  ws.lk = cov_matrix(kernel, plan.points, block);
  if (!nn.empty()) {
    ws.con = cov_matrix(kernel, plan.points, nn);
    ws.cross = cross_cov(kernel, plan.points, nn, plan.points, block);
  } else {
    ws.cross = DenseMatrix(0, block.size());
  }
  if (!y.empty()) {
    ws.y_block.reserve(block.size());
    for (std::size_t i : block) ws.y_block.push_back(y[i]);
    ws.y_neighbors.reserve(nn.size());
    for (std::size_t j : nn) ws.y_neighbors.push_back(y[j]);
  }
  return ws;
}

BlockConditional condition_block(const BlockWorkspace& ws, double base_scale,
                                 std::size_t block_id) {
  const std::size_t l = ws.lk.rows();
  BlockConditional out;
  if (ws.con.empty()) {
    out.mean.assign(l, 0.0);
    out.cov = ws.lk;
    return out;
  }
  const CholeskyFactor lcon = cholesky(ws.con, base_scale, block_id);
  if (lcon.jitter_applied > 0) ++out.jitter_events;
  const DenseMatrix w = tri_solve(lcon, ws.cross);
  std::vector<double> z = ws.y_neighbors.empty() ? std::vector<double>(lcon.size(), 0.0)
                                                 : tri_solve(lcon, ws.y_neighbors);
  auto [gram, proj] = gram_and_project(w, z);
  out.cov = ws.lk - gram;
  out.mean = std::move(proj);
  return out;
}

LogLikResult block_loglik(const VecchiaPlan& plan, std::span<const double> y,
                          const MaternParams& theta, Parallelism parallelism) {
  const MaternKernel kernel(theta, MaternKernel::Mode::tabulated);
  if (y.size() != plan.size()) throw InvalidArgument("block_loglik: y must have length n");

  struct Contribution {
    double value;
    int jitter_events;
  };
  auto outcome = batched_apply(
      plan.block_count(),
      [&](std::size_t pos) {
        const BlockWorkspace ws = assemble_workspace(plan, y, kernel, pos);
        BlockConditional cond = condition_block(ws, theta.sigma2, pos);
        const CholeskyFactor lnew = cholesky(cond.cov, theta.sigma2, pos);
        std::vector<double> resid = ws.y_block;
        for (std::size_t k = 0; k < resid.size(); ++k) resid[k] -= cond.mean[k];
        const double u = quadratic_form(cond.cov, lnew, resid);
        const double d = log_det(lnew);
        const double l = static_cast<double>(resid.size());
        return Contribution{-0.5 * (u + d + l * kLog2Pi),
                            cond.jitter_events + (lnew.jitter_applied > 0 ? 1 : 0)};
      },
      parallelism);
  const auto parts = std::move(outcome).value_or_throw();

  LogLikResult result;
  result.per_block.reserve(parts.size());
  for (const auto& c : parts) {
    result.per_block.push_back(c.value);
    result.loglik += c.value;
    result.jitter_events += c.jitter_events;
  }
  return result;
}

ImpliedPrecision implied_precision(const VecchiaPlan& plan, const MaternParams& theta,
                                   Parallelism parallelism) {
  const MaternKernel kernel(theta, MaternKernel::Mode::tabulated);
  const std::size_t n = plan.size();
  if (n > kDenseGuard) {
    throw InvalidArgument("implied_precision: n = " + std::to_string(n) +
                          " exceeds the dense guard of " + std::to_string(kDenseGuard));
  }

  // Block i contributes A^T D^{-1} A on (neighbors, block) with A = [-B, I],
  // B = cross^T con^{-1}. With D = L' L'^T this is (L'^{-1} A)^T (L'^{-1} A).
  struct Local {
    std::vector<std::size_t> idx;
    DenseMatrix gram;
    double log_det_d;
  };
  auto outcome = batched_apply(
      plan.block_count(),
      [&](std::size_t pos) {
        const auto& block = plan.block_at(pos);
        const auto& nn = plan.neighbors[pos];
        const std::size_t m = nn.size();
        const std::size_t l = block.size();
        const BlockWorkspace ws = assemble_workspace(plan, {}, kernel, pos);

        DenseMatrix a(l, m + l);
        DenseMatrix d_cov;
        if (m == 0) {
          d_cov = ws.lk;
        } else {
          const CholeskyFactor lcon = cholesky(ws.con, theta.sigma2, pos);
          const DenseMatrix w = tri_solve(lcon, ws.cross);
          // B^T = con^{-1} cross = L^{-T} W, an m x l matrix.
          const DenseMatrix bt = tri_solve(lcon, w, Transpose::transpose);
          for (std::size_t r = 0; r < l; ++r) {
            for (std::size_t c = 0; c < m; ++c) a(r, c) = -bt(c, r);
          }
          d_cov = ws.lk - gram_and_project(w, std::vector<double>(m, 0.0)).first;
        }
        for (std::size_t r = 0; r < l; ++r) a(r, m + r) = 1.0;

        const CholeskyFactor ld = cholesky(d_cov, theta.sigma2, pos);
        const DenseMatrix scaled = tri_solve(ld, a);
        Local out;
        out.idx.reserve(m + l);
        out.idx.insert(out.idx.end(), nn.begin(), nn.end());
        out.idx.insert(out.idx.end(), block.begin(), block.end());
        out.gram = gram_and_project(scaled, std::vector<double>(l, 0.0)).first;
        out.log_det_d = log_det(ld);
        return out;
      },
      parallelism);
  const auto locals = std::move(outcome).value_or_throw();

  ImpliedPrecision result;
  result.precision = DenseMatrix(n, n);
  for (const auto& loc : locals) {
    const std::size_t k = loc.idx.size();
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t c = 0; c < k; ++c) result.precision(loc.idx[a], loc.idx[c]) += loc.gram(a, c);
    }
    result.log_det -= loc.log_det_d;
  }
  return result;
}

ComplexityEstimate complexity_estimate(std::size_t n, std::size_t bc, std::size_t m) {
  if (n == 0 || bc == 0 || bc > n) throw InvalidArgument("complexity_estimate: need 1 <= bc <= n");
  const double nd = static_cast<double>(n);
  const double b = static_cast<double>(bc);
  const double md = static_cast<double>(m);
  const double block_size = nd / b;

  ComplexityEstimate e;
  e.memory_bytes_block = 8.0 * (nd * nd / (2.0 * b) + md * nd / 2.0 + b * md * md / 2.0 + md * b + nd);
  e.memory_bytes_classic = 8.0 * (nd * md * md / 2.0 + nd * md);
  e.flops_block = b * block_size * block_size * block_size / 3.0 + b * md * md * md / 3.0 +
                  2.0 * b * md * block_size * block_size;
  e.flops_classic = nd * md * md * md / 3.0;
  return e;
}

}  // namespace bvecchia
