#include "bvecchia/exact.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bvecchia/error.hpp"
#include "bvecchia/random.hpp"

namespace bvecchia {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Stream reserved for field simulation; other streams are used by spatial.
constexpr std::uint64_t kSimulationStream = 4;

void check_guard(std::size_t n, const char* who) {
  if (n > kDenseGuard) {
    throw InvalidArgument(std::string(who) + ": n = " + std::to_string(n) +
                          " exceeds the dense guard of " + std::to_string(kDenseGuard));
  }
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

double mean_diagonal(const DenseMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  const double m = s / static_cast<double>(a.rows());
  return m > 0.0 && std::isfinite(m) ? m : 1.0;
}

}  // namespace

DenseGP::DenseGP(LocationSet points, MaternParams theta)
    : points_(std::move(points)), theta_(theta) {
  theta_.validate();
  check_guard(points_.size(), "DenseGP");
  cov_ = cov_matrix(theta_, points_);
}

const CholeskyFactor& DenseGP::factor() const {
  std::call_once(once_, [this] { chol_ = cholesky(cov_, theta_.sigma2); });
  return chol_;
}

double DenseGP::log_det() const { return bvecchia::log_det(factor()); }

double DenseGP::loglik(std::span<const double> y) const {
  if (y.size() != size()) throw InvalidArgument("DenseGP::loglik: y must have length n");
  return loglik_at_zero() - 0.5 * quadratic_form(cov_, factor(), y);
}

double DenseGP::loglik_at_zero() const {
  return -0.5 * static_cast<double>(size()) * kLog2Pi - 0.5 * log_det();
}

double exact_loglik(const LocationSet& points, std::span<const double> y,
                    const MaternParams& theta) {
  return DenseGP(points, theta).loglik(y);
}

double kl_dense(const DenseMatrix& sigma0, const DenseMatrix& precision1) {
  const std::size_t n = sigma0.rows();
  if (sigma0.cols() != n || precision1.rows() != n || precision1.cols() != n) {
    throw InvalidArgument("kl_dense: both matrices must be n x n");
  }
  const double tr = trace_of_product(precision1, sigma0);
  const double ld_prec = log_det(cholesky(precision1, mean_diagonal(precision1)));
  const double ld_sigma = log_det(cholesky(sigma0, mean_diagonal(sigma0)));
  return 0.5 * (tr - static_cast<double>(n) - ld_prec - ld_sigma);
}

std::string_view to_string(KLMethod method) noexcept {
  switch (method) {
    case KLMethod::dense: return "dense";
    case KLMethod::loglik: return "loglik";
  }
  return "unknown";
}

namespace {

KLReport provenance(const VecchiaPlan& plan, KLMethod method) {
  KLReport r;
  r.method = method;
  r.n = plan.size();
  r.bc = plan.block_count();
  r.cs = plan.cs;
  r.strategy = plan.perm.strategy;
  r.seed = plan.perm.seed;
  return r;
}

void check_same_points(const VecchiaPlan& plan, const DenseGP& exact) {
  if (!(plan.points == exact.points())) {
    throw InvalidArgument("kl_vecchia: plan and exact model use different points");
  }
}

}  // namespace

KLReport kl_vecchia(const VecchiaPlan& plan, const MaternParams& theta, Parallelism parallelism) {
  check_guard(plan.size(), "kl_vecchia");
  const DenseGP exact(plan.points, theta);
  return kl_vecchia(plan, exact, parallelism);
}

KLReport kl_vecchia(const VecchiaPlan& plan, const DenseGP& exact, Parallelism parallelism) {
  check_same_points(plan, exact);
  const std::vector<double> zeros(plan.size(), 0.0);
  const double approx = block_loglik(plan, zeros, exact.theta(), parallelism).loglik;
  KLReport r = provenance(plan, KLMethod::loglik);
  r.kl = exact.loglik_at_zero() - approx;
  return r;
}

KLReport kl_vecchia_dense(const VecchiaPlan& plan, const DenseGP& exact,
                          Parallelism parallelism) {
  check_same_points(plan, exact);
  const ImpliedPrecision ip = implied_precision(plan, exact.theta(), parallelism);
  const double n = static_cast<double>(plan.size());
  const double tr = trace_of_product(ip.precision, exact.covariance());
  KLReport r = provenance(plan, KLMethod::dense);
  r.kl = 0.5 * (tr - n - ip.log_det - exact.log_det());
  r.trace_gap = tr - n;
  return r;
}

std::vector<double> simulate_grf(const DenseGP& gp, std::uint64_t seed) {
  const std::size_t n = gp.size();
  CounterRng rng(seed, kSimulationStream);
  std::vector<double> z(n);
  for (double& v : z) v = rng.normal();
  const DenseMatrix& l = gp.factor().lower;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = dot(l.row(i).first(i + 1), std::span<const double>(z).first(i + 1));
  }
  return y;
}

std::vector<double> simulate_grf(const LocationSet& points, const MaternParams& theta,
                                 std::uint64_t seed) {
  return simulate_grf(DenseGP(points, theta), seed);
}

ExactPrediction exact_predict(const LocationSet& train, std::span<const double> y,
                              const MaternParams& theta, const LocationSet& new_points) {
  theta.validate();
  check_guard(train.size() + new_points.size(), "exact_predict");
  if (y.size() != train.size()) throw InvalidArgument("exact_predict: y must have length n");
  const auto ti = iota_indices(train.size());
  const auto ni = iota_indices(new_points.size());

  const CholeskyFactor l = cholesky(cov_matrix(theta, train), theta.sigma2);
  // W = L^{-1} K(train, new); mean = W^T L^{-1} y, cov = K** - W^T W.
  const DenseMatrix w = tri_solve(l, cross_cov(theta, train, ti, new_points, ni));
  const auto z = tri_solve(l, y);
  auto [gram, proj] = gram_and_project(w, z);
  ExactPrediction out;
  out.mean = std::move(proj);
  out.cov = cov_matrix(theta, new_points) - gram;
  return out;
}

}  // namespace bvecchia
