#pragma once

#include <functional>

#include "nvspade/types.hpp"

namespace nvspade::detail {

/// Objective returning f(x); fills `grad` when it is non-null.
using Objective = std::function<double(const Vec& x, Vec* grad)>;

struct MinimizeResult {
  Vec x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Quasi-Newton (GSL bfgs2) with analytic gradients.
MinimizeResult minimize_bfgs(const Objective& f, const Vec& x0, double initial_step = 0.1, double gtol = 1e-9,
                             int max_iterations = 1000);

/// Derivative-free simplex search (GSL nmsimplex2).
MinimizeResult minimize_nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0, double initial_step,
                                    double size_tol = 1e-8, int max_iterations = 2000);

struct LeastSquaresResult {
  Vec x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool rank_deficient = false;
};

/// Levenberg-Marquardt (GSL multifit_nlinear). `jacobian` may be empty for finite differences.
LeastSquaresResult least_squares(const std::function<Vec(const Vec&)>& residuals,
                                 const std::function<Mat(const Vec&)>& jacobian, const Vec& x0, int n_residuals,
                                 int max_iterations = 200);

/// Switch the GSL abort-on-error handler off; errors are reported through status codes.
void quiet_gsl();

}  // namespace nvspade::detail
