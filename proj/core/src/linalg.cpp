#include "bvecchia/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bvecchia/error.hpp"

namespace bvecchia {

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("DenseMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("matrix subtraction: shape mismatch");
  }
  DenseMatrix c = a;
  auto cd = c.data();
  const auto bd = b.data();
  for (std::size_t k = 0; k < cd.size(); ++k) cd[k] -= bd[k];
  return c;
}

double frobenius_norm(const DenseMatrix& a) noexcept {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double max_abs(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double trace_of_product(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols()) {
    throw InvalidArgument("trace_of_product: shapes are not conformable");
  }
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) t += a(i, k) * b(k, i);
  }
  return t;
}

namespace {

constexpr std::size_t kTile = 64;

inline double dot_raw(const double* a, const double* b, std::size_t n) noexcept {
  return dot(std::span<const double>(a, n), std::span<const double>(b, n));
}

// Left-looking Cholesky on the lower triangle of an n x n row-major buffer.
// Columns are processed in tiles of kTile; updates from earlier tiles are
// applied tile by tile so the operands stay cache resident. For n <= kTile
// this is the plain unblocked algorithm.
bool factor_lower_in_place(std::vector<double>& l, std::size_t n) {
  for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
    const std::size_t j1 = std::min(n, j0 + kTile);
    for (std::size_t k0 = 0; k0 < j0; k0 += kTile) {
      const std::size_t len = std::min(k0 + kTile, j0) - k0;
      for (std::size_t i = j0; i < n; ++i) {
        const double* li = &l[i * n + k0];
        const std::size_t jmax = std::min(j1, i + 1);
        for (std::size_t j = j0; j < jmax; ++j) l[i * n + j] -= dot_raw(li, &l[j * n + k0], len);
      }
    }
    for (std::size_t j = j0; j < j1; ++j) {
      const double* lj = &l[j * n + j0];
      const double s = l[j * n + j] - dot_raw(lj, lj, j - j0);
      if (!(s > 0.0) || !std::isfinite(s)) return false;
      const double djj = std::sqrt(s);
      l[j * n + j] = djj;
      for (std::size_t i = j + 1; i < n; ++i) {
        l[i * n + j] = (l[i * n + j] - dot_raw(&l[i * n + j0], lj, j - j0)) / djj;
      }
    }
  }
  return true;
}

}  // namespace

CholeskyFactor cholesky(const DenseMatrix& a, double base_scale,
                        std::optional<std::size_t> block_id) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InvalidArgument("cholesky: matrix must be square");
  if (!(base_scale > 0.0) || !std::isfinite(base_scale)) {
    throw InvalidArgument("cholesky: base_scale must be positive and finite");
  }

  std::vector<double> work(n * n);
  for (double jitter_factor : kJitterSchedule) {
    const double jitter = jitter_factor * base_scale;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) work[i * n + j] = a(i, j);
      for (std::size_t j = i + 1; j < n; ++j) work[i * n + j] = 0.0;
      work[i * n + i] += jitter;
    }
    if (factor_lower_in_place(work, n)) {
      CholeskyFactor f;
      f.lower = DenseMatrix(n, n);
      std::copy(work.begin(), work.end(), f.lower.data().begin());
      f.jitter_applied = jitter;
      return f;
    }
  }
  std::string msg = "cholesky: matrix not positive definite after jitter " +
                    std::to_string(kJitterSchedule[std::size(kJitterSchedule) - 1] * base_scale);
  if (block_id) msg += " (block " + std::to_string(*block_id) + ")";
  throw NotPositiveDefinite(msg, block_id);
}

double log_det(const CholeskyFactor& factor) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < factor.size(); ++j) s += std::log(factor.lower(j, j));
  return 2.0 * s;
}

DenseMatrix tri_solve(const CholeskyFactor& factor, const DenseMatrix& b, Transpose trans) {
  const std::size_t n = factor.size();
  if (b.rows() != n) throw InvalidArgument("tri_solve: row count of B must match the factor");
  const DenseMatrix& l = factor.lower;
  DenseMatrix x = b;
  const std::size_t cols = b.cols();
  if (trans == Transpose::none) {
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = x.row(i);
      for (std::size_t k = 0; k < i; ++k) {
        const double lik = l(i, k);
        if (lik == 0.0) continue;
        const auto xk = x.row(k);
        for (std::size_t c = 0; c < cols; ++c) xi[c] -= lik * xk[c];
      }
      const double inv = 1.0 / l(i, i);
      for (std::size_t c = 0; c < cols; ++c) xi[c] *= inv;
    }
  } else {
    for (std::size_t i = n; i-- > 0;) {
      auto xi = x.row(i);
      for (std::size_t k = i + 1; k < n; ++k) {
        const double lki = l(k, i);
        if (lki == 0.0) continue;
        const auto xk = x.row(k);
        for (std::size_t c = 0; c < cols; ++c) xi[c] -= lki * xk[c];
      }
      const double inv = 1.0 / l(i, i);
      for (std::size_t c = 0; c < cols; ++c) xi[c] *= inv;
    }
  }
  return x;
}

std::vector<double> tri_solve(const CholeskyFactor& factor, std::span<const double> b,
                              Transpose trans) {
  const std::size_t n = factor.size();
  if (b.size() != n) throw InvalidArgument("tri_solve: vector length must match the factor");
  const DenseMatrix& l = factor.lower;
  std::vector<double> x(b.begin(), b.end());
  if (trans == Transpose::none) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = (x[i] - dot(l.row(i).first(i), std::span<const double>(x).first(i))) / l(i, i);
    }
  } else {
    for (std::size_t i = n; i-- > 0;) {
      double s = x[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
      x[i] = s / l(i, i);
    }
  }
  return x;
}

std::vector<double> chol_solve(const CholeskyFactor& factor, std::span<const double> b) {
  const auto y = tri_solve(factor, b, Transpose::none);
  return tri_solve(factor, y, Transpose::transpose);
}

std::vector<double> refined_solve(const DenseMatrix& a, const CholeskyFactor& factor,
                                  std::span<const double> b) {
  const std::size_t n = factor.size();
  if (a.rows() != n || a.cols() != n || b.size() != n) {
    throw InvalidArgument("refined_solve: shapes of A, factor and b must agree");
  }
  std::vector<double> x = chol_solve(factor, b);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double acc = b[i] - static_cast<long double>(factor.jitter_applied) * x[i];
    for (std::size_t j = 0; j <= i; ++j) acc -= static_cast<long double>(a(i, j)) * x[j];
    for (std::size_t j = i + 1; j < n; ++j) acc -= static_cast<long double>(a(j, i)) * x[j];
    r[i] = static_cast<double>(acc);
  }
  const std::vector<double> dx = chol_solve(factor, r);
  for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
  return x;
}

double quadratic_form(const DenseMatrix& a, const CholeskyFactor& factor,
                      std::span<const double> b) {
  const std::vector<double> x = refined_solve(a, factor, b);
  long double q = 0.0L;
  for (std::size_t i = 0; i < b.size(); ++i) q += static_cast<long double>(b[i]) * x[i];
  return static_cast<double>(q);
}

std::pair<DenseMatrix, std::vector<double>> gram_and_project(const DenseMatrix& w,
                                                             std::span<const double> z) {
  const std::size_t k = w.rows();
  const std::size_t b = w.cols();
  if (z.size() != k) throw InvalidArgument("gram_and_project: z length must equal rows of W");
  // Extended-precision accumulation: the Schur complement lk - W^T W cancels
  // heavily for smooth kernels, and its rounding dominates the likelihood error.
  std::vector<long double> acc(b * b, 0.0L);
  std::vector<long double> proj_acc(b, 0.0L);
  for (std::size_t r = 0; r < k; ++r) {
    const auto wr = w.row(r);
    const double zr = z[r];
    for (std::size_t a = 0; a < b; ++a) {
      const long double wa = wr[a];
      proj_acc[a] += wa * zr;
      long double* ga = acc.data() + a * b;
      for (std::size_t c = a; c < b; ++c) ga[c] += wa * wr[c];
    }
  }
  DenseMatrix g(b, b);
  std::vector<double> proj(b);
  for (std::size_t a = 0; a < b; ++a) {
    proj[a] = static_cast<double>(proj_acc[a]);
    for (std::size_t c = a; c < b; ++c) {
      g(a, c) = static_cast<double>(acc[a * b + c]);
      g(c, a) = g(a, c);
    }
  }
  return {std::move(g), std::move(proj)};
}

}  // namespace bvecchia
