#include <cmath>
#include <numbers>

#include "bvecchia/error.hpp"
#include "bvecchia/kernels.hpp"

namespace bvecchia {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Taylor coefficients of 1 / Gamma(1 + z) about z = 0.
constexpr double kRecipGamma[] = {
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
};
constexpr int kRecipGammaTerms = sizeof(kRecipGamma) / sizeof(kRecipGamma[0]);

// Temme's auxiliary gamma functions for |mu| <= 1/2:
//   gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),  gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2,
// taken from the odd and even parts of the series (no cancellation near mu = 0).
struct TemmeGammas {
  double gam1, gam2, gampl, gammi;
};

TemmeGammas temme_gammas(double mu) {
  const double mu2 = mu * mu;
  double odd = 0.0;
  double even = 0.0;
  for (int k = kRecipGammaTerms - 1; k >= 0; --k) {
    if (k % 2 == 1) {
      odd = odd * mu2 + kRecipGamma[k];
    } else {
      even = even * mu2 + kRecipGamma[k];
    }
  }
  TemmeGammas g;
  g.gam1 = -odd;
  g.gam2 = even;
  g.gampl = g.gam2 - mu * g.gam1;  // 1 / Gamma(1 + mu)
  g.gammi = g.gam2 + mu * g.gam1;  // 1 / Gamma(1 - mu)
  return g;
}

}  // namespace

BesselOrder::BesselOrder(double nu) : nu_(nu) {
  if (!std::isfinite(nu) || nu < 0.0) throw InvalidArgument("bessel_k: order must be >= 0");
  nl_ = static_cast<int>(nu + 0.5);
  mu_ = nu - nl_;
  const TemmeGammas g = temme_gammas(mu_);
  gam1_ = g.gam1;
  gam2_ = g.gam2;
  gampl_ = g.gampl;
  gammi_ = g.gammi;
  const double pimu = std::numbers::pi * mu_;
  fact_ = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
}

double BesselOrder::scaled(double x, double log_scale) const {
  if (!std::isfinite(x) || x <= 0.0) throw InvalidArgument("bessel_k: argument must be > 0");
  const double mu = mu_;
  const double mu2 = mu * mu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;

  // K_mu and K_{mu+1}, both multiplied by exp(-shift).
  double kmu = 0.0;
  double kmu1 = 0.0;
  double shift = 0.0;

  if (x < 2.0) {
    const double x2 = 0.5 * x;
    const double d = -std::log(x2);
    const double e = mu * d;
    const double ee = std::exp(e);
    const double fact2 = std::abs(e) < kEps ? 1.0 : 0.5 * (ee - 1.0 / ee) / e;
    double ff = fact_ * (gam1_ * 0.5 * (ee + 1.0 / ee) + gam2_ * fact2 * d);
    double sum = ff;
    double p = 0.5 * ee / gampl_;
    double q = 0.5 / (ee * gammi_);
    double c = 1.0;
    const double dd = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - mu2);
      c *= dd / di;
      p /= di - mu;
      q /= di + mu;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - di * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    if (i > kMaxIter) throw InvalidArgument("bessel_k: series did not converge");
    kmu = sum;
    kmu1 = sum1 * xi2;
  } else {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i <= kMaxIter; ++i) {
      a -= 2.0 * (i - 1);
      c = -a * c / i;
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < kEps) break;
    }
    if (i > kMaxIter) throw InvalidArgument("bessel_k: continued fraction did not converge");
    h = a1 * h;
    kmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
    kmu1 = kmu * (mu + x + 0.5 - h) * xi;
    shift = x;
  }

  for (int i = 1; i <= nl_; ++i) {
    const double next = (mu + i) * xi2 * kmu1 + kmu;
    kmu = kmu1;
    kmu1 = next;
  }
  return kmu * std::exp(log_scale - shift);
}

double bessel_k(double nu, double x) { return BesselOrder(nu).scaled(x, 0.0); }

}  // namespace bvecchia
