#include "bvecchia/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "bvecchia/error.hpp"

namespace bvecchia {

void MaternParams::validate() const {
  for (double v : as_array()) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw InvalidArgument("MaternParams: sigma2, beta and nu must be finite and positive");
    }
  }
}

void ParamBounds::validate() const {
  lower.validate();
  upper.validate();
  const auto lo = lower.as_array();
  const auto hi = upper.as_array();
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(lo[k] < hi[k])) throw InvalidArgument("ParamBounds: lower must be below upper");
  }
}

bool ParamBounds::contains(const MaternParams& theta) const noexcept {
  const auto lo = lower.as_array();
  const auto hi = upper.as_array();
  const auto v = theta.as_array();
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(v[k] >= lo[k] && v[k] <= hi[k])) return false;
  }
  return true;
}

namespace {

void check_distance(double dist) {
  if (!std::isfinite(dist) || dist < 0.0) {
    throw InvalidArgument("matern_cov: distance must be finite and non-negative");
  }
}

}  // namespace

namespace {

// Octaves [2^e, 2^(e+1)) of d / beta covered by the table; below the first
// octave the Bessel routine is evaluated directly (its series is short there).
constexpr int kTableMinExp = -6;
constexpr int kTableMaxExp = 5;  // last octave [32, 64) contains the cutoff
constexpr int kChebNodes = 22;
constexpr int kOctaves = kTableMaxExp - kTableMinExp + 1;

}  // namespace

MaternKernel::MaternKernel(const MaternParams& theta, Mode mode)
    : theta_(theta),
      form_(Form::general),
      inv_beta_(1.0 / theta.beta),
      log_pref_(0.0),
      order_((theta.validate(), theta.nu)) {
  if (mode != Mode::bessel) {
    if (theta.nu == 0.5) form_ = Form::half;
    if (theta.nu == 1.5) form_ = Form::three_halves;
    if (theta.nu == 2.5) form_ = Form::five_halves;
  }
  log_pref_ = (1.0 - theta.nu) * std::numbers::ln2 - std::lgamma(theta.nu);
  if (mode != Mode::tabulated || form_ != Form::general) return;

  table_.assign(static_cast<std::size_t>(kOctaves * kChebNodes), 0.0);
  std::array<double, kChebNodes> f{};
  constexpr double n = kChebNodes;
  for (int o = 0; o < kOctaves; ++o) {
    const double lo = std::ldexp(1.0, kTableMinExp + o);
    for (int k = 0; k < kChebNodes; ++k) {
      const double t = std::cos(std::numbers::pi * (k + 0.5) / n);
      f[k] = general(lo * (1.5 + 0.5 * t));
    }
    double* c = &table_[static_cast<std::size_t>(o * kChebNodes)];
    for (int j = 0; j < kChebNodes; ++j) {
      double acc = 0.0;
      for (int k = 0; k < kChebNodes; ++k) acc += f[k] * std::cos(std::numbers::pi * j * (k + 0.5) / n);
      c[j] = (j == 0 ? 1.0 : 2.0) * acc / n;
    }
  }
}

double MaternKernel::general(double r) const {
  // 2^(1-nu) / Gamma(nu) * r^nu * K_nu(r), scaled inside the Bessel routine.
  const double v = order_.scaled(r, log_pref_ + theta_.nu * std::log(r));
  return std::isfinite(v) ? std::min(1.0, v) : 1.0;
}

double MaternKernel::operator()(double dist) const {
  check_distance(dist);
  if (dist == 0.0) return theta_.sigma2;
  const double r = dist * inv_beta_;
  if (r > kMaternCutoff) return 0.0;
  switch (form_) {
    case Form::half: return theta_.sigma2 * std::exp(-r);
    case Form::three_halves: return theta_.sigma2 * (1.0 + r) * std::exp(-r);
    case Form::five_halves: return theta_.sigma2 * (1.0 + r + r * r / 3.0) * std::exp(-r);
    case Form::general: break;
  }
  const int e = std::ilogb(r);
  if (table_.empty() || e < kTableMinExp) return theta_.sigma2 * general(r);
  const double* c = &table_[static_cast<std::size_t>((e - kTableMinExp) * kChebNodes)];
  // Clenshaw recurrence at t in [-1, 1).
  const double t = std::ldexp(r, 1 - e) - 3.0;
  double b1 = 0.0;
  double b2 = 0.0;
  for (int j = kChebNodes - 1; j >= 1; --j) {
    const double b0 = 2.0 * t * b1 - b2 + c[j];
    b2 = b1;
    b1 = b0;
  }
  const double v = t * b1 - b2 + c[0];
  return theta_.sigma2 * std::min(1.0, v);
}

double matern_cov(const MaternParams& theta, double dist) { return MaternKernel(theta)(dist); }

double matern_cov_general(const MaternParams& theta, double dist) {
  return MaternKernel(theta, MaternKernel::Mode::bessel)(dist);
}

DenseMatrix cross_cov(const MaternParams& theta, const LocationSet& pa,
                      std::span<const std::size_t> a, const LocationSet& pb,
                      std::span<const std::size_t> b) {
  return cross_cov(MaternKernel(theta, MaternKernel::Mode::tabulated), pa, a, pb, b);
}

DenseMatrix cov_matrix(const MaternParams& theta, const LocationSet& points,
                       std::span<const std::size_t> idx) {
  return cov_matrix(MaternKernel(theta, MaternKernel::Mode::tabulated), points, idx);
}

DenseMatrix cross_cov(const MaternKernel& kernel, const LocationSet& pa,
                      std::span<const std::size_t> a, const LocationSet& pb,
                      std::span<const std::size_t> b) {
  if (pa.dim() != pb.dim()) throw InvalidArgument("cross_cov: dimension mismatch");
  DenseMatrix out(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ai = pa.point(a[i]);
    for (std::size_t j = 0; j < b.size(); ++j) {
      out(i, j) = kernel(std::sqrt(squared_distance(ai, pb.point(b[j]))));
    }
  }
  return out;
}

DenseMatrix cov_matrix(const MaternKernel& kernel, const LocationSet& points,
                       std::span<const std::size_t> idx) {
  const double sigma2 = kernel.params().sigma2;
  const std::size_t k = idx.size();
  DenseMatrix out(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto pi = points.point(idx[i]);
    out(i, i) = sigma2;
    for (std::size_t j = 0; j < i; ++j) {
      const double c = kernel(std::sqrt(squared_distance(pi, points.point(idx[j]))));
      out(i, j) = c;
      out(j, i) = c;
    }
  }
  return out;
}

DenseMatrix cov_matrix(const MaternParams& theta, const LocationSet& points) {
  std::vector<std::size_t> all(points.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return cov_matrix(theta, points, all);
}

RangeLevel parse_range_level(std::string_view name) {
  if (name == "low") return RangeLevel::low;
  if (name == "medium") return RangeLevel::medium;
  if (name == "high") return RangeLevel::high;
  throw InvalidArgument("unknown range level '" + std::string(name) +
                        "' (expected low, medium or high)");
}

std::string_view to_string(RangeLevel level) noexcept {
  switch (level) {
    case RangeLevel::low: return "low";
    case RangeLevel::medium: return "medium";
    case RangeLevel::high: return "high";
  }
  return "unknown";
}

double table1_beta(double nu, RangeLevel level) {
  // Rows: effective range 0.1 / 0.3 / 0.8; columns: nu = 0.5 / 1.5 / 2.5.
  static constexpr double kBeta[3][3] = {
      {0.026270, 0.017512, 0.014290},
      {0.078809, 0.052537, 0.042869},
      {0.210158, 0.140098, 0.114318},
  };
  std::size_t col = 0;
  if (nu == 0.5) {
    col = 0;
  } else if (nu == 1.5) {
    col = 1;
  } else if (nu == 2.5) {
    col = 2;
  } else {
    throw InvalidArgument("table1_beta: nu must be 0.5, 1.5 or 2.5");
  }
  const auto row = static_cast<std::size_t>(level);
  if (row > 2) throw InvalidArgument("table1_beta: unknown range level");
  return kBeta[row][col];
}

}  // namespace bvecchia
