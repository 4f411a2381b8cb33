#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bvecchia/linalg.hpp"
#include "bvecchia/spatial.hpp"

namespace bvecchia {

// Isotropic Matern parameters: variance, range, smoothness.
struct MaternParams {
  double sigma2 = 1.0;
  double beta = 0.1;
  double nu = 0.5;

  std::array<double, 3> as_array() const noexcept { return {sigma2, beta, nu}; }
  static MaternParams from_array(const std::array<double, 3>& v) noexcept {
    return {v[0], v[1], v[2]};
  }
  // Throws InvalidArgument unless all three are finite and strictly positive.
  void validate() const;

  friend bool operator==(const MaternParams&, const MaternParams&) = default;
};

// Box constraints on (sigma2, beta, nu) for estimation.
struct ParamBounds {
  MaternParams lower{0.01, 0.001, 0.1};
  MaternParams upper{5.0, 1.0, 4.0};

  void validate() const;
  bool contains(const MaternParams& theta) const noexcept;
};

// Scaled distances beyond this are treated as fully decorrelated.
inline constexpr double kMaternCutoff = 45.0;

// Modified Bessel function of the second kind K_nu(x) for nu >= 0, x > 0
// (Temme series below x = 2, Steed's continued fraction above, forward
// recurrence in the order).
double bessel_k(double nu, double x);

// Order-dependent constants of bessel_k, computed once for repeated use.
class BesselOrder {
 public:
  explicit BesselOrder(double nu);

  double nu() const noexcept { return nu_; }
  // K_nu(x) * exp(log_scale), with the scale folded in before overflow can occur.
  double scaled(double x, double log_scale) const;

 private:
  double nu_;
  int nl_;
  double mu_;
  double gam1_, gam2_, gampl_, gammi_;
  double fact_;
};

// sigma2 * 2^(1-nu) / Gamma(nu) * r^nu * K_nu(r), r = dist / beta.
// Closed forms are used for nu in {0.5, 1.5, 2.5}; dist == 0 returns sigma2.
double matern_cov(const MaternParams& theta, double dist);

// Same function evaluated through bessel_k for every nu (no closed forms).
double matern_cov_general(const MaternParams& theta, double dist);

// Matern covariance with the parameter-dependent constants hoisted out.
//   direct     closed forms for nu in {0.5, 1.5, 2.5}, bessel_k otherwise
//              (what matern_cov computes)
//   bessel     bessel_k for every nu (what matern_cov_general computes)
//   tabulated  closed forms, otherwise a piecewise Chebyshev interpolant of
//              the Bessel expression on octaves of d / beta, built on
//              construction; agrees with `direct` to about 1e-14 * sigma2
class MaternKernel {
 public:
  enum class Mode { direct, bessel, tabulated };

  explicit MaternKernel(const MaternParams& theta, Mode mode = Mode::direct);

  const MaternParams& params() const noexcept { return theta_; }
  double operator()(double dist) const;

 private:
  enum class Form { general, half, three_halves, five_halves };

  double general(double r) const;

  MaternParams theta_;
  Form form_;
  double inv_beta_;
  double log_pref_;  // (1 - nu) log 2 - lgamma(nu)
  BesselOrder order_;
  std::vector<double> table_;  // Chebyshev coefficients per octave, empty unless tabulated
};

// Entry (i, j) is the covariance between a[i] in `pa` and b[j] in `pb`.
// The MaternParams overloads build a tabulated kernel.
DenseMatrix cross_cov(const MaternKernel& kernel, const LocationSet& pa,
                      std::span<const std::size_t> a, const LocationSet& pb,
                      std::span<const std::size_t> b);
DenseMatrix cross_cov(const MaternParams& theta, const LocationSet& pa,
                      std::span<const std::size_t> a, const LocationSet& pb,
                      std::span<const std::size_t> b);
// Symmetric covariance of the listed points of one set (diagonal exactly sigma2).
DenseMatrix cov_matrix(const MaternKernel& kernel, const LocationSet& points,
                       std::span<const std::size_t> idx);
DenseMatrix cov_matrix(const MaternParams& theta, const LocationSet& points,
                       std::span<const std::size_t> idx);
// Covariance of every point in the set.
DenseMatrix cov_matrix(const MaternParams& theta, const LocationSet& points);

enum class RangeLevel { low, medium, high };

RangeLevel parse_range_level(std::string_view name);
std::string_view to_string(RangeLevel level) noexcept;

// Range parameter beta of the nu x effective-range design grid.
// nu must be 0.5, 1.5 or 2.5.
double table1_beta(double nu, RangeLevel level);

}  // namespace bvecchia
