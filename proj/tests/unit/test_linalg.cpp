#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <span>

#include <Eigen/Dense>

#include "bvecchia/batched.hpp"
#include "bvecchia/error.hpp"
#include "bvecchia/linalg.hpp"
#include "oracles.hpp"

namespace bv = bvecchia;

namespace {

bv::DenseMatrix reconstruct(const bv::CholeskyFactor& f) {
  return bv::matmul(f.lower, f.lower.transposed());
}

bool bitwise_equal(const bv::DenseMatrix& a, const bv::DenseMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Cholesky, IdentityIsItsOwnFactor) {
  const auto f = bv::cholesky(bv::DenseMatrix::identity(3), 1.0);
  EXPECT_EQ(f.lower, bv::DenseMatrix::identity(3));
  EXPECT_EQ(f.jitter_applied, 0.0);
}

TEST(Cholesky, HandComputedTwoByTwo) {
  const auto f = bv::cholesky(bv::DenseMatrix{{4, 2}, {2, 3}}, 1.0);
  EXPECT_DOUBLE_EQ(f.lower(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f.lower(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(f.lower(1, 1), std::sqrt(2.0));
  EXPECT_EQ(f.lower(0, 1), 0.0);
  EXPECT_NEAR(bv::log_det(f), std::log(8.0), 1e-15);
}

TEST(Cholesky, RankOneGetsJitterOrFailsCleanly) {
  try {
    const auto f = bv::cholesky(bv::DenseMatrix{{1, 1}, {1, 1}}, 1.0);
    EXPECT_GT(f.jitter_applied, 0.0);
    for (double v : f.lower.data()) EXPECT_TRUE(std::isfinite(v));
  } catch (const bv::NotPositiveDefinite&) {
    SUCCEED();
  }
}

TEST(Cholesky, IndefiniteReportsBlock) {
  try {
    bv::cholesky(bv::DenseMatrix{{1, 0}, {0, -1}}, 1.0, 17);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const bv::NotPositiveDefinite& e) {
    ASSERT_TRUE(e.block().has_value());
    EXPECT_EQ(*e.block(), 17u);
  }
}

TEST(Cholesky, RejectsBadShapes) {
  EXPECT_THROW(bv::cholesky(bv::DenseMatrix(2, 3), 1.0), bv::InvalidArgument);
  EXPECT_THROW(bv::cholesky(bv::DenseMatrix::identity(2), 0.0), bv::InvalidArgument);
}

TEST(CholeskyProperty, RoundTripUpTo512) {
  oracle::Gen gen(3);
  for (std::size_t n : {1u, 2u, 7u, 63u, 64u, 65u, 130u, 257u, 512u}) {
    const auto a = gen.spd(n, 0.5);
    const auto f = bv::cholesky(a, 1.0);
    const double err = bv::frobenius_norm(reconstruct(f) - a);
    EXPECT_LE(err, 1e-8 * bv::frobenius_norm(a)) << "n=" << n;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(f.lower(i, i), 0.0);
      for (std::size_t j = i + 1; j < n; ++j) EXPECT_EQ(f.lower(i, j), 0.0);
    }
  }
}

TEST(CholeskyProperty, LogDetMatchesEigen) {
  oracle::Gen gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = gen.integer(1, 8);
    const auto a = gen.spd(n);
    const double ref = std::log(oracle::to_eigen(a).determinant());
    EXPECT_LE(std::abs(bv::log_det(bv::cholesky(a, 1.0)) - ref), 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST(TriSolve, TrivialCases) {
  const auto id = bv::cholesky(bv::DenseMatrix::identity(3), 1.0);
  const bv::DenseMatrix b{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(bv::tri_solve(id, b), b);
  const auto two = bv::cholesky(bv::DenseMatrix{{4}}, 1.0);
  const double four[] = {4.0};
  EXPECT_EQ(bv::tri_solve(two, four), std::vector<double>{2.0});
  EXPECT_THROW(bv::tri_solve(id, bv::DenseMatrix(2, 2)), bv::InvalidArgument);
  const double short_vec[] = {1.0, 2.0};
  EXPECT_THROW(bv::tri_solve(id, short_vec), bv::InvalidArgument);
}

TEST(TriSolveProperty, ResidualBound) {
  oracle::Gen gen(6);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = gen.integer(1, 64);
    const std::size_t k = gen.integer(1, 5);
    const auto f = bv::cholesky(gen.spd(n, static_cast<double>(n)), 1.0);
    const auto b = gen.matrix(n, k);
    for (auto t : {bv::Transpose::none, bv::Transpose::transpose}) {
      const auto x = bv::tri_solve(f, b, t);
      const auto lhs = t == bv::Transpose::none ? bv::matmul(f.lower, x)
                                                : bv::matmul(f.lower.transposed(), x);
      EXPECT_LE(bv::max_abs((lhs - b).data()), 1e-12 * bv::max_abs(b.data())) << "n=" << n;
    }
    const auto bv_ = gen.normals(n);
    const auto xs = bv::chol_solve(f, bv_);
    const Eigen::VectorXd ref = oracle::to_eigen(reconstruct(f)).llt().solve(
        Eigen::Map<const Eigen::VectorXd>(bv_.data(), static_cast<Eigen::Index>(n)));
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(xs[i], ref(i), 1e-9 * (1 + std::abs(ref(i))));
  }
}

TEST(GramAndProject, TrivialCases) {
  const double z[] = {1.0, -2.0, 3.0};
  const auto [g0, p0] = bv::gram_and_project(bv::DenseMatrix(3, 2), z);
  EXPECT_EQ(g0, bv::DenseMatrix(2, 2));
  EXPECT_EQ(p0, (std::vector<double>{0.0, 0.0}));
  const auto [g1, p1] = bv::gram_and_project(bv::DenseMatrix::identity(3), z);
  EXPECT_EQ(g1, bv::DenseMatrix::identity(3));
  EXPECT_EQ(p1, (std::vector<double>{1.0, -2.0, 3.0}));
  const double z2[] = {1.0};
  EXPECT_THROW(bv::gram_and_project(bv::DenseMatrix::identity(3), z2), bv::InvalidArgument);
}

TEST(GramAndProject, MatchesTripleLoop) {
  oracle::Gen gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = gen.matrix(4, 2);
    const auto z = gen.normals(4);
    const auto [g, p] = bv::gram_and_project(w, z);
    for (std::size_t i = 0; i < 2; ++i) {
      double pi = 0.0;
      for (std::size_t k = 0; k < 4; ++k) pi += w(k, i) * z[k];
      EXPECT_NEAR(p[i], pi, 1e-13);
      for (std::size_t j = 0; j < 2; ++j) {
        double gij = 0.0;
        for (std::size_t k = 0; k < 4; ++k) gij += w(k, i) * w(k, j);
        EXPECT_NEAR(g(i, j), gij, 1e-13);
      }
    }
    EXPECT_EQ(g(0, 1), g(1, 0));
  }
}

namespace {

// Hilbert matrix: a classic badly conditioned SPD test case (cond ~ 1e10 at n = 8).
bv::DenseMatrix hilbert(std::size_t n) {
  bv::DenseMatrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) h(i, j) = 1.0 / static_cast<double>(i + j + 1);
  }
  return h;
}

// A^{-1} b in long double, as a reference.
std::vector<long double> long_double_solve(const bv::DenseMatrix& a, std::span<const double> b) {
  const auto n = static_cast<Eigen::Index>(a.rows());
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> m(n, n);
  Eigen::Matrix<long double, Eigen::Dynamic, 1> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = b[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  const Eigen::Matrix<long double, Eigen::Dynamic, 1> x = m.llt().solve(v);
  return {x.data(), x.data() + n};
}

}  // namespace

TEST(RefinedSolve, BeatsPlainSolveOnHilbert) {
  const auto h = hilbert(8);
  const auto f = bv::cholesky(h, 1.0);
  ASSERT_EQ(f.jitter_applied, 0.0);
  const std::vector<double> b{1, -1, 2, 0.5, -3, 1, 0, 2};
  const auto ref = long_double_solve(h, b);
  const auto plain = bv::chol_solve(f, b);
  const auto refined = bv::refined_solve(h, f, b);
  long double err_plain = 0, err_refined = 0, scale = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    err_plain = std::max(err_plain, std::abs(plain[i] - ref[i]));
    err_refined = std::max(err_refined, std::abs(refined[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  EXPECT_LT(err_refined, err_plain);
  EXPECT_LT(static_cast<double>(err_refined / scale), 1e-8);
}

TEST(QuadraticForm, MatchesLongDoubleReference) {
  oracle::Gen gen(21);
  for (std::size_t n : {1u, 5u, 8u}) {
    const auto a = n == 8 ? hilbert(8) : gen.spd(n, 0.5);
    const auto f = bv::cholesky(a, 1.0);
    const auto b = gen.normals(n);
    const auto x = long_double_solve(a, b);
    long double ref = 0;
    for (std::size_t i = 0; i < n; ++i) ref += b[i] * x[i];
    EXPECT_NEAR(bv::quadratic_form(a, f, b), static_cast<double>(ref), 1e-10 * std::abs(static_cast<double>(ref)));
  }
  const auto f = bv::cholesky(bv::DenseMatrix::identity(2), 1.0);
  const double b3[] = {1, 2, 3};
  EXPECT_THROW(bv::quadratic_form(bv::DenseMatrix::identity(2), f, b3), bv::InvalidArgument);
  EXPECT_THROW(bv::refined_solve(bv::DenseMatrix::identity(3), f, b3), bv::InvalidArgument);
}

TEST(DenseMatrix, BasicOperations) {
  const bv::DenseMatrix a{{1, 2}, {3, 4}};
  const bv::DenseMatrix b{{0, 1}, {1, 0}};
  EXPECT_EQ(bv::matmul(a, b), (bv::DenseMatrix{{2, 1}, {4, 3}}));
  EXPECT_EQ(a.transposed(), (bv::DenseMatrix{{1, 3}, {2, 4}}));
  EXPECT_DOUBLE_EQ(bv::trace_of_product(a, b), 5.0);
  EXPECT_DOUBLE_EQ(bv::frobenius_norm(a), std::sqrt(30.0));
  EXPECT_THROW(bv::matmul(a, bv::DenseMatrix(3, 1)), bv::InvalidArgument);
  EXPECT_THROW((bv::DenseMatrix{{1, 2}, {3}}), bv::InvalidArgument);
}

TEST(BatchedApply, EmptyAndSingle) {
  auto none = bv::batched_apply(0, [](std::size_t i) { return i; });
  EXPECT_TRUE(none.ok());
  EXPECT_TRUE(std::move(none).value_or_throw().empty());
  auto one = bv::batched_apply(1, [](std::size_t i) { return i * 10 + 3; }, bv::Parallelism{4});
  EXPECT_EQ(std::move(one).value_or_throw(), std::vector<std::size_t>{3});
}

TEST(BatchedApply, ThousandCholeskyTasksBitwiseEqualAcrossThreads) {
  oracle::Gen gen(10);
  std::vector<bv::DenseMatrix> mats;
  for (int i = 0; i < 1000; ++i) mats.push_back(gen.spd(gen.integer(1, 40)));
  auto task = [&](std::size_t i) { return bv::cholesky(mats[i], 1.0).lower; };
  const auto seq = bv::batched_apply(mats.size(), task, bv::Parallelism{1});
  for (std::size_t threads : {2u, 3u, 8u}) {
    const auto par = bv::batched_apply(mats.size(), task, bv::Parallelism{threads});
    ASSERT_TRUE(par.ok());
    for (std::size_t i = 0; i < mats.size(); ++i) {
      ASSERT_TRUE(bitwise_equal(*seq.results[i], *par.results[i])) << "task " << i;
    }
  }
}

TEST(BatchedApply, FailuresCarryIndexAndOthersComplete) {
  auto outcome = bv::batched_apply(
      10,
      [](std::size_t i) -> int {
        if (i == 3 || i == 7) throw bv::InvalidData("bad " + std::to_string(i));
        return static_cast<int>(i);
      },
      bv::Parallelism{4});
  ASSERT_EQ(outcome.failures.size(), 2u);
  EXPECT_EQ(outcome.failures[0].index, 3u);
  EXPECT_EQ(outcome.failures[1].index, 7u);
  EXPECT_EQ(outcome.failures[0].message, "bad 3");
  EXPECT_EQ(*outcome.results[9], 9);
  EXPECT_FALSE(outcome.results[3].has_value());
  EXPECT_THROW(std::move(outcome).value_or_throw(), bv::InvalidData);
}
