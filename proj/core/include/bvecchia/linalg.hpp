#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace bvecchia {

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& a) noexcept;
double max_abs(std::span<const double> v) noexcept;
double trace_of_product(const DenseMatrix& a, const DenseMatrix& b);

struct CholeskyFactor {
  DenseMatrix lower;          // L with L * L^T = A + jitter * I; zeros above the diagonal
  double jitter_applied = 0;  // 0 when A factored as given

  std::size_t size() const noexcept { return lower.rows(); }
};

// Diagonal shifts tried in order, as multiples of base_scale.
inline constexpr double kJitterSchedule[] = {0.0, 1e-10, 1e-8, 1e-6};

// Lower Cholesky factor of a symmetric matrix (only the lower triangle is
// read). Retries with the jitter schedule; if every attempt fails, throws
// NotPositiveDefinite carrying `block_id`. Unblocked below 64 rows, tiled above.
CholeskyFactor cholesky(const DenseMatrix& a, double base_scale,
                        std::optional<std::size_t> block_id = std::nullopt);

// 2 * sum(log L_jj) = log det(A + jitter * I).
double log_det(const CholeskyFactor& factor) noexcept;

enum class Transpose { none, transpose };

// Solves L X = B (Transpose::none, forward substitution) or L^T X = B.
DenseMatrix tri_solve(const CholeskyFactor& factor, const DenseMatrix& b,
                      Transpose trans = Transpose::none);
std::vector<double> tri_solve(const CholeskyFactor& factor, std::span<const double> b,
                              Transpose trans = Transpose::none);

// A^{-1} b using both triangular solves.
std::vector<double> chol_solve(const CholeskyFactor& factor, std::span<const double> b);

// (A + jitter * I)^{-1} b with one step of iterative refinement; the residual
// is accumulated in extended precision. Reads the lower triangle of `a`.
std::vector<double> refined_solve(const DenseMatrix& a, const CholeskyFactor& factor,
                                  std::span<const double> b);

// b^T (A + jitter * I)^{-1} b for the matrix `a` that `factor` was computed from.
// One step of iterative refinement with an extended-precision residual keeps
// the result accurate when A is badly conditioned. Reads the lower triangle of `a`.
double quadratic_form(const DenseMatrix& a, const CholeskyFactor& factor,
                      std::span<const double> b);

// (W^T W, W^T z) for a k x b matrix W and a k-vector z, accumulated in extended
// precision. The Gram matrix is exactly symmetric.
std::pair<DenseMatrix, std::vector<double>> gram_and_project(const DenseMatrix& w,
                                                             std::span<const double> z);

double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace bvecchia
