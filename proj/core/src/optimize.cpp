#include "bvecchia/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "bvecchia/error.hpp"

namespace bvecchia {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;
constexpr double kInf = std::numeric_limits<double>::infinity();

void clamp_unit(std::vector<double>& u) {
  for (double& v : u) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

NelderMeadResult nelder_mead_box(const Objective& f, std::vector<double> x0,
                                 std::span<const double> lower, std::span<const double> upper,
                                 const NelderMeadOptions& options) {
  const std::size_t d = x0.size();
  if (d == 0) throw InvalidArgument("nelder_mead_box: empty parameter vector");
  if (lower.size() != d || upper.size() != d) {
    throw InvalidArgument("nelder_mead_box: bounds must match the parameter count");
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (!(lower[k] < upper[k])) throw InvalidArgument("nelder_mead_box: lower must be below upper");
    if (!(x0[k] >= lower[k] && x0[k] <= upper[k])) {
      throw InvalidArgument("nelder_mead_box: starting point lies outside the bounds");
    }
  }
  if (options.max_evals == 0) throw InvalidArgument("nelder_mead_box: max_evals must be positive");

  auto to_x = [&](const std::vector<double>& u) {
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = std::clamp(lower[k] + u[k] * (upper[k] - lower[k]), lower[k], upper[k]);
    }
    return x;
  };

  std::vector<double> best_u(d);
  for (std::size_t k = 0; k < d; ++k) best_u[k] = (x0[k] - lower[k]) / (upper[k] - lower[k]);
  std::vector<double> best_x = x0;
  std::size_t evals = 1;
  double best_f = f(x0);
  if (std::isnan(best_f) || best_f == kInf) {
    throw InvalidData("nelder_mead_box: objective is not finite at the starting point");
  }

  auto eval = [&](const std::vector<double>& u) {
    ++evals;
    const std::vector<double> x = to_x(u);
    double v = kInf;
    try {
      v = f(x);
    } catch (const std::exception&) {
      v = kInf;
    }
    if (std::isnan(v)) v = kInf;
    if (v < best_f) {
      best_f = v;
      best_u = u;
      best_x = x;
    }
    return v;
  };

  bool converged = false;
  double previous_round_best = kInf;
  for (std::size_t round = 0; round <= options.restarts; ++round) {
    std::vector<std::vector<double>> simplex{best_u};
    std::vector<double> fv{best_f};
    const std::vector<double> base_x = to_x(best_u);
    for (std::size_t k = 0; k < d && evals < options.max_evals; ++k) {
      std::vector<double> v = best_u;
      double step = options.initial_step * std::abs(base_x[k]) / (upper[k] - lower[k]);
      if (!(step > 1e-3)) step = 1e-3;
      step = std::min(step, 0.5);
      v[k] = v[k] + step <= 1.0 ? v[k] + step : v[k] - step;
      clamp_unit(v);
      fv.push_back(eval(v));
      simplex.push_back(std::move(v));
    }
    if (simplex.size() < d + 1) break;

    bool round_converged = false;
    std::vector<std::size_t> order(d + 1);
    while (true) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const std::size_t ib = order.front();
      const std::size_t iw = order.back();
      const std::size_t isw = order[d - 1];

      double size = 0.0;
      for (const auto& v : simplex) {
        for (std::size_t k = 0; k < d; ++k) size = std::max(size, std::abs(v[k] - simplex[ib][k]));
      }
      const double spread = fv[iw] - fv[ib];
      if (spread <= options.ftol * (std::abs(fv[ib]) + 1e-300) && size <= options.xtol) {
        round_converged = true;
        break;
      }
      if (evals >= options.max_evals) break;

      std::vector<double> c(d, 0.0);
      for (std::size_t j = 0; j <= d; ++j) {
        if (j == iw) continue;
        for (std::size_t k = 0; k < d; ++k) c[k] += simplex[j][k];
      }
      for (double& v : c) v /= static_cast<double>(d);

      auto along = [&](const std::vector<double>& from, double t) {
        // c + t * (from - c), projected onto the unit box.
        std::vector<double> p(d);
        for (std::size_t k = 0; k < d; ++k) p[k] = c[k] + t * (from[k] - c[k]);
        clamp_unit(p);
        return p;
      };

      std::vector<double> xr = along(simplex[iw], -kReflect);
      const double fr = eval(xr);
      if (fr < fv[ib]) {
        std::vector<double> xe = along(simplex[iw], -kReflect * kExpand);
        const double fe = evals < options.max_evals ? eval(xe) : kInf;
        if (fe < fr) {
          simplex[iw] = std::move(xe);
          fv[iw] = fe;
        } else {
          simplex[iw] = std::move(xr);
          fv[iw] = fr;
        }
        continue;
      }
      if (fr < fv[isw]) {
        simplex[iw] = std::move(xr);
        fv[iw] = fr;
        continue;
      }
      if (evals >= options.max_evals) break;
      const bool outside = fr < fv[iw];
      std::vector<double> xc = outside ? along(xr, kContract) : along(simplex[iw], kContract);
      const double fc = eval(xc);
      if (outside ? fc <= fr : fc < fv[iw]) {
        simplex[iw] = std::move(xc);
        fv[iw] = fc;
        continue;
      }
      for (std::size_t j = 0; j <= d && evals < options.max_evals; ++j) {
        if (j == ib) continue;
        for (std::size_t k = 0; k < d; ++k) {
          simplex[j][k] = simplex[ib][k] + kShrink * (simplex[j][k] - simplex[ib][k]);
        }
        fv[j] = eval(simplex[j]);
      }
    }

    converged = round_converged;
    if (!round_converged) break;
    if (round > 0 && previous_round_best - best_f <= options.ftol * (std::abs(best_f) + 1e-300)) {
      break;
    }
    previous_round_best = best_f;
  }

  NelderMeadResult result;
  result.x = std::move(best_x);
  result.f = best_f;
  result.evaluations = evals;
  result.converged = converged;
  return result;
}

}  // namespace bvecchia
