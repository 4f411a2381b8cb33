#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bvecchia {

struct NelderMeadOptions {
  // Stop when (f_worst - f_best) <= ftol * (|f_best| + 1e-300) and the simplex
  // is smaller than xtol in box-normalized coordinates.
  double ftol = 1e-7;
  double xtol = 1e-6;
  std::size_t max_evals = 2000;
  // Initial simplex offset per coordinate, as a fraction of |x0_k|.
  double initial_step = 0.25;
  // Fresh simplices built around the best point after convergence.
  std::size_t restarts = 1;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

// Minimizes f over the box [lower, upper] with a Nelder-Mead simplex that
// works in coordinates scaled to the unit cube and projects every trial
// point back onto the box. Exceptions from f at x0 propagate; later
// exceptions and non-finite values count as +infinity. The returned point is
// the best one ever evaluated.
NelderMeadResult nelder_mead_box(const Objective& f, std::vector<double> x0,
                                 std::span<const double> lower, std::span<const double> upper,
                                 const NelderMeadOptions& options = {});

}  // namespace bvecchia
