#include "optimize.hpp"

#include <cmath>
#include <limits>
#include <mutex>

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

namespace nvspade::detail {

namespace {

Vec to_eigen(const gsl_vector* v) {
  Vec out(static_cast<Eigen::Index>(v->size));
  for (size_t i = 0; i < v->size; ++i) out(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
  return out;
}

void to_gsl(const Vec& x, gsl_vector* v) {
  for (Eigen::Index i = 0; i < x.size(); ++i) gsl_vector_set(v, static_cast<size_t>(i), x(i));
}

constexpr double kHuge = 1e300;

double guard(double v) { return std::isfinite(v) ? v : kHuge; }

double fdf_f(const gsl_vector* x, void* params) {
  const auto& f = *static_cast<const Objective*>(params);
  return guard(f(to_eigen(x), nullptr));
}

void fdf_df(const gsl_vector* x, void* params, gsl_vector* g) {
  const auto& f = *static_cast<const Objective*>(params);
  Vec grad(static_cast<Eigen::Index>(x->size));
  f(to_eigen(x), &grad);
  if (!grad.allFinite()) grad.setZero();
  to_gsl(grad, g);
}

void fdf_fdf(const gsl_vector* x, void* params, double* value, gsl_vector* g) {
  const auto& f = *static_cast<const Objective*>(params);
  Vec grad(static_cast<Eigen::Index>(x->size));
  *value = guard(f(to_eigen(x), &grad));
  if (!grad.allFinite()) grad.setZero();
  to_gsl(grad, g);
}

double nm_f(const gsl_vector* x, void* params) {
  const auto& f = *static_cast<const std::function<double(const Vec&)>*>(params);
  return guard(f(to_eigen(x)));
}

struct LsqParams {
  const std::function<Vec(const Vec&)>* residuals;
  const std::function<Mat(const Vec&)>* jacobian;
};

int lsq_f(const gsl_vector* x, void* params, gsl_vector* out) {
  auto* p = static_cast<LsqParams*>(params);
  const Vec r = (*p->residuals)(to_eigen(x));
  if (!r.allFinite()) return GSL_EDOM;
  to_gsl(r, out);
  return GSL_SUCCESS;
}

int lsq_df(const gsl_vector* x, void* params, gsl_matrix* jac) {
  auto* p = static_cast<LsqParams*>(params);
  const Mat j = (*p->jacobian)(to_eigen(x));
  if (!j.allFinite()) return GSL_EDOM;
  for (Eigen::Index r = 0; r < j.rows(); ++r)
    for (Eigen::Index c = 0; c < j.cols(); ++c) gsl_matrix_set(jac, static_cast<size_t>(r), static_cast<size_t>(c), j(r, c));
  return GSL_SUCCESS;
}

}  // namespace

void quiet_gsl() {
  static std::once_flag flag;
  std::call_once(flag, [] { gsl_set_error_handler_off(); });
}

MinimizeResult minimize_bfgs(const Objective& f, const Vec& x0, double initial_step, double gtol, int max_iterations) {
  quiet_gsl();
  const auto n = static_cast<size_t>(x0.size());
  MinimizeResult result;
  result.x = x0;
  result.value = f(x0, nullptr);
  if (n == 0) {
    result.converged = true;
    return result;
  }

  gsl_multimin_function_fdf fn;
  fn.n = n;
  fn.f = fdf_f;
  fn.df = fdf_df;
  fn.fdf = fdf_fdf;
  fn.params = const_cast<Objective*>(&f);

  gsl_vector* x = gsl_vector_alloc(n);
  to_gsl(x0, x);
  gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
  gsl_multimin_fdfminimizer_set(s, &fn, x, initial_step, 0.1);

  int iter = 0;
  int status = GSL_CONTINUE;
  while (iter < max_iterations) {
    ++iter;
    status = gsl_multimin_fdfminimizer_iterate(s);
    if (status != GSL_SUCCESS) break;
    status = gsl_multimin_test_gradient(s->gradient, gtol);
    if (status == GSL_SUCCESS) break;
  }
  const double fv = s->f;
  if (std::isfinite(fv) && fv <= result.value) {
    result.x = to_eigen(s->x);
    result.value = fv;
  }
  result.iterations = iter;
  // bfgs2 stops with ENOPROG once the line search cannot improve; at that point
  // the gradient is typically at round-off level, so accept a loose gradient test.
  result.converged = status == GSL_SUCCESS ||
                     (status == GSL_ENOPROG && gsl_multimin_test_gradient(s->gradient, std::sqrt(gtol)) == GSL_SUCCESS);
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(x);
  return result;
}

MinimizeResult minimize_nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0, double initial_step,
                                    double size_tol, int max_iterations) {
  quiet_gsl();
  const auto n = static_cast<size_t>(x0.size());
  MinimizeResult result;
  result.x = x0;
  result.value = f(x0);
  if (n == 0) {
    result.converged = true;
    return result;
  }

  gsl_multimin_function fn;
  fn.n = n;
  fn.f = nm_f;
  fn.params = const_cast<std::function<double(const Vec&)>*>(&f);

  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  to_gsl(x0, x);
  gsl_vector_set_all(step, initial_step);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, step);

  int iter = 0;
  int status = GSL_CONTINUE;
  while (iter < max_iterations) {
    ++iter;
    status = gsl_multimin_fminimizer_iterate(s);
    if (status != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol);
    if (status == GSL_SUCCESS) break;
  }
  if (std::isfinite(s->fval) && s->fval <= result.value) {
    result.x = to_eigen(s->x);
    result.value = s->fval;
  }
  result.iterations = iter;
  result.converged = status == GSL_SUCCESS;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return result;
}

LeastSquaresResult least_squares(const std::function<Vec(const Vec&)>& residuals,
                                 const std::function<Mat(const Vec&)>& jacobian, const Vec& x0, int n_residuals,
                                 int max_iterations) {
  quiet_gsl();
  const auto p = static_cast<size_t>(x0.size());
  const auto n = static_cast<size_t>(n_residuals);
  LsqParams params{&residuals, &jacobian};

  gsl_multifit_nlinear_fdf fdf;
  fdf.f = lsq_f;
  fdf.df = jacobian ? lsq_df : nullptr;
  fdf.fvv = nullptr;
  fdf.n = n;
  fdf.p = p;
  fdf.params = &params;

  gsl_multifit_nlinear_parameters fparams = gsl_multifit_nlinear_default_parameters();
  fparams.trs = gsl_multifit_nlinear_trs_lm;
  gsl_multifit_nlinear_workspace* w = gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &fparams, n, p);
  gsl_vector* x = gsl_vector_alloc(p);
  to_gsl(x0, x);

  LeastSquaresResult result;
  result.x = x0;
  int info = 0;
  int status = gsl_multifit_nlinear_init(x, &fdf, w);
  if (status == GSL_SUCCESS) {
    status = gsl_multifit_nlinear_driver(static_cast<size_t>(max_iterations), 1e-12, 1e-12, 1e-12, nullptr, nullptr,
                                         &info, w);
    result.x = to_eigen(gsl_multifit_nlinear_position(w));
    result.iterations = static_cast<int>(gsl_multifit_nlinear_niter(w));
    gsl_vector* f = gsl_multifit_nlinear_residual(w);
    double norm = gsl_blas_dnrm2(f);
    result.residual_norm = norm;
    result.converged = status == GSL_SUCCESS;

    gsl_matrix* jac = gsl_multifit_nlinear_jac(w);
    Mat j(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (size_t r = 0; r < n; ++r)
      for (size_t c = 0; c < p; ++c) j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = gsl_matrix_get(jac, r, c);
    Eigen::JacobiSVD<Mat> svd(j);
    const Vec sv = svd.singularValues();
    result.rank_deficient = sv.size() == 0 || sv(sv.size() - 1) <= 1e-12 * std::max(sv(0), 1e-300);
  } else {
    result.residual_norm = residuals(x0).norm();
  }
  gsl_vector_free(x);
  gsl_multifit_nlinear_free(w);
  return result;
}

}  // namespace nvspade::detail
