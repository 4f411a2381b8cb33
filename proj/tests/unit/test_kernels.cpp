#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/bessel.hpp>

#include "bvecchia/error.hpp"
#include "bvecchia/kernels.hpp"
#include "oracles.hpp"

namespace bv = bvecchia;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Matern, HalfIntegerValuesAtOneRange) {
  const double beta = 0.07;
  EXPECT_NEAR(bv::matern_cov({1, beta, 0.5}, beta), 0.3678794412, 1e-10);
  EXPECT_NEAR(bv::matern_cov({1, beta, 1.5}, beta), 0.7357588823, 1e-10);
  EXPECT_NEAR(bv::matern_cov({1, beta, 2.5}, beta), 0.8583853627, 1e-10);
}

TEST(Matern, ZeroDistanceIsVariance) {
  for (double nu : {0.3, 0.5, 1.0, 1.5, 2.5, 3.7}) {
    EXPECT_EQ(bv::matern_cov({2.5, 0.1, nu}, 0.0), 2.5);
    EXPECT_EQ(bv::matern_cov_general({2.5, 0.1, nu}, 0.0), 2.5);
  }
}

TEST(Matern, CutoffBeyondFortyFiveRanges) {
  EXPECT_EQ(bv::matern_cov({1, 0.01, 0.8}, 0.46), 0.0);
  EXPECT_GT(bv::matern_cov({1, 0.01, 0.8}, 0.44), 0.0);
}

TEST(Matern, RejectsBadInput) {
  EXPECT_THROW(bv::matern_cov({1, 0.1, 0.5}, -1.0), bv::InvalidArgument);
  EXPECT_THROW(bv::matern_cov({1, 0.1, 0.5}, std::numeric_limits<double>::quiet_NaN()),
               bv::InvalidArgument);
  EXPECT_THROW(bv::matern_cov({0, 0.1, 0.5}, 0.1), bv::InvalidArgument);
  EXPECT_THROW(bv::matern_cov({1, -0.1, 0.5}, 0.1), bv::InvalidArgument);
  EXPECT_THROW(bv::matern_cov({1, 0.1, std::numeric_limits<double>::infinity()}, 0.1),
               bv::InvalidArgument);
}

TEST(Matern, BesselPathMatchesClosedForms) {
  for (double nu : {0.5, 1.5, 2.5}) {
    for (double x = 1e-6; x <= 20.0; x *= 1.07) {
      const bv::MaternParams th{1.3, 0.2, nu};
      EXPECT_LE(rel(bv::matern_cov_general(th, x * 0.2), bv::matern_cov(th, x * 0.2)), 1e-10)
          << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(Bessel, MatchesBoostAcrossOrdersAndArguments) {
  for (double nu : {0.0, 0.1, 0.5, 0.77, 1.0, 1.5, 2.2, 2.5, 3.9, 4.0}) {
    for (double x = 1e-4; x < 60.0; x *= 1.3) {
      const double ref = boost::math::cyl_bessel_k(nu, x);
      EXPECT_LE(rel(bv::bessel_k(nu, x), ref), 1e-12) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(Bessel, ScaledFoldsInTheExponent) {
  const bv::BesselOrder k(1.3);
  EXPECT_LE(rel(k.scaled(2.0, 1.5), bv::bessel_k(1.3, 2.0) * std::exp(1.5)), 1e-14);
  // K_nu(700) underflows on its own but the scaled value is representable.
  const double scaled = k.scaled(700.0, 700.0);
  EXPECT_TRUE(std::isfinite(scaled));
  EXPECT_GT(scaled, 0.0);
}

TEST(MaternKernel, ModesAgree) {
  for (double nu : {0.2, 0.5, 0.9, 1.5, 2.1, 2.5, 3.3}) {
    const bv::MaternParams th{1.7, 0.05, nu};
    const bv::MaternKernel direct(th, bv::MaternKernel::Mode::direct);
    const bv::MaternKernel bessel(th, bv::MaternKernel::Mode::bessel);
    const bv::MaternKernel table(th, bv::MaternKernel::Mode::tabulated);
    for (double d = 1e-5; d < 3.0; d *= 1.11) {
      EXPECT_NEAR(table(d), direct(d), 1e-13 * th.sigma2) << "nu=" << nu << " d=" << d;
      EXPECT_LE(std::abs(bessel(d) - direct(d)), 1e-10 * std::max(direct(d), 1e-300) + 1e-300);
      EXPECT_NEAR(direct(d), oracle::matern(th, d), 1e-12 * th.sigma2);
    }
    EXPECT_EQ(table.params(), th);
  }
}

TEST(MaternProperty, BoundedMonotoneAndHomogeneous) {
  oracle::Gen gen(31);
  for (int trial = 0; trial < 200; ++trial) {
    const bv::MaternParams th{gen.uniform(0.1, 4.0), gen.uniform(0.005, 0.5), gen.uniform(0.1, 4.0)};
    const double c = gen.uniform(0.1, 10.0);
    double prev = th.sigma2;
    for (double d = 0.0; d <= 2.0; d += 0.01) {
      const double v = bv::matern_cov(th, d);
      EXPECT_LE(v, prev * (1 + 1e-13)) << "non-increasing";
      EXPECT_LE(v, th.sigma2);
      EXPECT_GE(v, 0.0);
      if (d / th.beta <= 45.0) {
        EXPECT_GT(v, 0.0);
      } else {
        EXPECT_EQ(v, 0.0);
      }
      EXPECT_NEAR(bv::matern_cov({c * th.sigma2, th.beta, th.nu}, d), c * v, 1e-13 * c * th.sigma2);
      prev = v;
    }
  }
}

TEST(CrossCov, SingletonAndSymmetric) {
  const auto pts = bv::uniform_locations(30, 2, 5);
  const bv::MaternParams th{2.0, 0.1, 1.2};
  const std::size_t one[] = {4};
  const auto m1 = bv::cov_matrix(th, pts, one);
  ASSERT_EQ(m1.rows(), 1u);
  EXPECT_EQ(m1(0, 0), 2.0);
  const auto k = bv::cov_matrix(th, pts);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(k(i, i), 2.0);
    for (std::size_t j = 0; j < 30; ++j) {
      EXPECT_EQ(k(i, j), k(j, i));
      EXPECT_NEAR(k(i, j), oracle::matern(th, oracle::distance(pts, i, pts, j)), 1e-12);
    }
  }
}

TEST(CrossCov, CollinearExponentialIsToeplitz) {
  const double h = 0.05;
  const bv::LocationSet pts({0.1, 0.3, 0.1 + h, 0.3, 0.1 + 2 * h, 0.3}, 2);
  const bv::MaternParams th{1.0, 0.08, 0.5};
  const auto k = bv::cov_matrix(th, pts);
  const double r = std::exp(-h / th.beta);
  EXPECT_NEAR(k(0, 1), r, 1e-14);
  EXPECT_NEAR(k(1, 2), r, 1e-14);
  EXPECT_NEAR(k(0, 2), r * r, 1e-14);
}

TEST(CrossCov, RectangularMatchesScalar) {
  const auto a = bv::uniform_locations(7, 3, 1);
  const auto b = bv::uniform_locations(5, 3, 2);
  const std::size_t ia[] = {0, 3, 6};
  const std::size_t ib[] = {1, 4};
  const bv::MaternParams th{1.0, 0.2, 0.8};
  const auto m = bv::cross_cov(th, a, ia, b, ib);
  ASSERT_EQ(m.rows(), 3u);
  ASSERT_EQ(m.cols(), 2u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(m(i, j), bv::matern_cov(th, oracle::distance(a, ia[i], b, ib[j])), 1e-13);
    }
  }
  const auto c2 = bv::uniform_locations(5, 2, 2);
  EXPECT_THROW(bv::cross_cov(th, a, ia, c2, ib), bv::InvalidArgument);
}

TEST(CrossCovProperty, PositiveSemiDefinite) {
  oracle::Gen gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = gen.integer(1, 200);
    const auto pts = gen.points(n, gen.integer(2, 3));
    const auto th = gen.table1_theta();
    EXPECT_NO_THROW(bv::cholesky(bv::cov_matrix(th, pts), th.sigma2)) << "trial " << trial;
  }
}

TEST(Table1, VerbatimConstants) {
  EXPECT_EQ(bv::table1_beta(0.5, bv::RangeLevel::low), 0.026270);
  EXPECT_EQ(bv::table1_beta(1.5, bv::RangeLevel::medium), 0.052537);
  EXPECT_EQ(bv::table1_beta(2.5, bv::RangeLevel::high), 0.114318);
  EXPECT_THROW(bv::table1_beta(1.0, bv::RangeLevel::low), bv::InvalidArgument);
  EXPECT_EQ(bv::parse_range_level("medium"), bv::RangeLevel::medium);
  EXPECT_THROW(bv::parse_range_level("huge"), bv::InvalidArgument);
}

TEST(ParamBounds, ValidateAndContain) {
  bv::ParamBounds b;
  EXPECT_NO_THROW(b.validate());
  EXPECT_TRUE(b.contains({1.0, 0.1, 0.5}));
  EXPECT_FALSE(b.contains({6.0, 0.1, 0.5}));
  b.upper.beta = 0.0001;
  EXPECT_THROW(b.validate(), bv::InvalidArgument);
}
