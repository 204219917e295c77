#include "optimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace mpmrf::detail {

namespace {

constexpr double kPenalty = 1e100;

double trampoline(const gsl_vector* v, void* params) {
  const auto& f = *static_cast<const Objective*>(params);
  const double value = f(std::span<const double>(v->data, v->size));
  return std::isfinite(value) ? value : kPenalty;
}

void numeric_gradient(const gsl_vector* v, void* params, gsl_vector* g) {
  const auto& f = *static_cast<const Objective*>(params);
  std::vector<double> x(v->data, v->data + v->size);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    const double xi = x[i];
    x[i] = xi + h;
    const double up = f(x);
    x[i] = xi - h;
    const double down = f(x);
    x[i] = xi;
    const double d = (up - down) / (2.0 * h);
    gsl_vector_set(g, i, std::isfinite(d) ? d : 0.0);
  }
}

void value_and_gradient(const gsl_vector* v, void* params, double* value, gsl_vector* g) {
  *value = trampoline(v, params);
  numeric_gradient(v, params, g);
}

void disable_gsl_abort() {
  static std::once_flag flag;
  std::call_once(flag, [] { gsl_set_error_handler_off(); });
}

}  // namespace

MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0, std::vector<double> step,
                           double size_tol, int max_iter) {
  disable_gsl_abort();
  const std::size_t n = x0.size();
  MinimizeResult result;
  if (n == 0) {
    result.x = x0;
    result.f = f(std::span<const double>());
    result.converged = true;
    return result;
  }

  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0[i]);
    gsl_vector_set(ss, i, step[i]);
  }
  gsl_multimin_function fn{&trampoline, n, const_cast<Objective*>(&f)};
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);

  int status = GSL_CONTINUE;
  int iter = 0;
  while (status == GSL_CONTINUE && iter < max_iter) {
    ++iter;
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol);
  }

  result.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.x[i] = gsl_vector_get(s->x, i);
  result.f = s->fval;
  result.iterations = iter;
  result.converged = status == GSL_SUCCESS && result.f < kPenalty;

  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return result;
}

MinimizeResult quasi_newton(const Objective& f, std::vector<double> x0, double grad_tol,
                            int max_iter) {
  disable_gsl_abort();
  const std::size_t n = x0.size();
  MinimizeResult result;
  if (n == 0) {
    result.x = x0;
    result.f = f(std::span<const double>());
    result.converged = true;
    return result;
  }
  gsl_vector* x = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, x0[i]);
  gsl_multimin_function_fdf fn{&trampoline, &numeric_gradient, &value_and_gradient, n,
                               const_cast<Objective*>(&f)};
  gsl_multimin_fdfminimizer* s =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
  gsl_multimin_fdfminimizer_set(s, &fn, x, 0.01, 0.1);

  int status = GSL_CONTINUE;
  int iter = 0;
  while (status == GSL_CONTINUE && iter < max_iter) {
    ++iter;
    if (gsl_multimin_fdfminimizer_iterate(s) != GSL_SUCCESS) break;
    status = gsl_multimin_test_gradient(s->gradient, grad_tol);
  }
  if (status != GSL_SUCCESS) status = gsl_multimin_test_gradient(s->gradient, grad_tol);

  result.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.x[i] = gsl_vector_get(s->x, i);
  result.f = s->f;
  result.iterations = iter;
  result.converged = status == GSL_SUCCESS && result.f < kPenalty;

  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(x);
  return result;
}

}  // namespace mpmrf::detail
