#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bvecchia/kernels.hpp"
#include "bvecchia/linalg.hpp"
#include "bvecchia/spatial.hpp"
#include "bvecchia/vecchia.hpp"

namespace bvecchia {

// Dense Gaussian process on a fixed point set. The covariance is built on
// construction; its Cholesky factor is computed once, on first use, and is
// read-only afterwards, so a DenseGP may be shared between threads.
class DenseGP {
 public:
  // Throws InvalidArgument when the point count exceeds kDenseGuard.
  DenseGP(LocationSet points, MaternParams theta);

  DenseGP(const DenseGP&) = delete;
  DenseGP& operator=(const DenseGP&) = delete;

  const LocationSet& points() const noexcept { return points_; }
  const MaternParams& theta() const noexcept { return theta_; }
  std::size_t size() const noexcept { return points_.size(); }
  const DenseMatrix& covariance() const noexcept { return cov_; }
  const CholeskyFactor& factor() const;

  double log_det() const;
  // Zero-mean Gaussian log-density of y.
  double loglik(std::span<const double> y) const;
  // loglik at the zero vector: -(n/2) log 2pi - (1/2) log|Sigma|.
  double loglik_at_zero() const;

 private:
  LocationSet points_;
  MaternParams theta_;
  DenseMatrix cov_;
  mutable std::once_flag once_;
  mutable CholeskyFactor chol_;
};

double exact_loglik(const LocationSet& points, std::span<const double> y,
                    const MaternParams& theta);

// KL(N(0, sigma0) || N(0, precision1^{-1})).
double kl_dense(const DenseMatrix& sigma0, const DenseMatrix& precision1);

enum class KLMethod { dense, loglik };

std::string_view to_string(KLMethod method) noexcept;

struct KLReport {
  double kl = 0;
  KLMethod method = KLMethod::loglik;
  std::size_t n = 0;
  std::size_t bc = 0;
  std::size_t cs = 0;
  Ordering strategy = Ordering::random;
  std::uint64_t seed = 0;
  // tr(precision * sigma0) - n; only filled by the dense method.
  std::optional<double> trace_gap;
};

// KL between the exact density and the block Vecchia density, obtained as
// the difference of the two log-likelihoods at y = 0.
KLReport kl_vecchia(const VecchiaPlan& plan, const MaternParams& theta,
                    Parallelism parallelism = {});
// Same, reusing the factor of an exact model built on plan.points.
KLReport kl_vecchia(const VecchiaPlan& plan, const DenseGP& exact, Parallelism parallelism = {});

// Same quantity from the dense formula with the implied precision.
KLReport kl_vecchia_dense(const VecchiaPlan& plan, const DenseGP& exact,
                          Parallelism parallelism = {});

// y = L z with L the Cholesky factor of the covariance and z standard normal
// draws from CounterRng(seed). The same seed always yields the same field.
std::vector<double> simulate_grf(const LocationSet& points, const MaternParams& theta,
                                 std::uint64_t seed);
std::vector<double> simulate_grf(const DenseGP& gp, std::uint64_t seed);

struct ExactPrediction {
  std::vector<double> mean;
  DenseMatrix cov;
};

// Simple kriging: mean K*y Kyy^{-1} y and covariance K** - K*y Kyy^{-1} Ky*.
ExactPrediction exact_predict(const LocationSet& train, std::span<const double> y,
                              const MaternParams& theta, const LocationSet& new_points);

}  // namespace bvecchia
