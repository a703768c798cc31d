#pragma once

// Batch (deterministic) ADMM. The x-subproblem
//   argmin_x f(x) + beta_t^T (Ax + By_t - c) + (rho/2)||Ax + By_t - c||^2
// has no closed form for the logistic loss, so it is solved inexactly by
// gradient descent with step 1/nu_L, warm-started at x_t.

#include <optional>
#include <string>

#include "scas/linalg.hpp"
#include "scas/model.hpp"
#include "scas/solvers/common.hpp"

namespace scas {

struct BatchConfig {
  double inner_tol = 1e-8;            // stop when ||grad_x L|| <= inner_tol
  std::size_t inner_max_iters = 1000;
  std::optional<double> step;         // default 1 / nu_L
  std::optional<InitialPoint> init;
};

inline SolveResult batch_admm_solve(const AdmmProblem& prob, const BatchConfig& config,
                                    std::uint64_t /*seed*/, std::size_t T,
                                    const RunHooks& hooks = {}) {
  prob.validate();
  require_closed_form_y(prob);
  if (T == 0) throw ConfigError("batch_admm_solve: T must be >= 1");
  if (!(config.inner_tol > 0.0)) throw ConfigError("batch_admm_solve: inner_tol must be > 0");
  const std::size_t n = prob.n(), p = prob.p(), l = prob.l();
  const auto& A = prob.constraint.A;
  const auto& c = prob.constraint.c;

  double step = 0.0;
  SolveResult res;
  if (config.step) {
    step = *config.step;
  } else {
    const auto nl = nu_L(prob);
    if (!nl.converged) res.warnings.push_back("nu_L eigenvalue estimate did not converge");
    step = 1.0 / nl.value;
  }
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("batch_admm_solve: invalid step size");

  AdmmState st = detail::initial_state(prob, config.init);
  VectorArena arena(p);
  arena.account_external(2);
  Vector& grad = arena.p_vector();
  Vector& ax = arena.vector(l);
  Vector& by = arena.vector(l);
  Vector& u = arena.vector(l);

  WorkCounters counters;
  counters.n = n;
  std::size_t unconverged = 0;

  for (std::size_t t = 0; t < T; ++t) {
    matvec_into(prob.constraint.B, st.y, by);
    for (std::size_t it = 0;; ++it) {
      full_grad_into(prob, st.x, grad);
      counters.full_gradient_samples += n;
      st.gradient_evaluations += n;
      matvec_into(A, st.x, ax);
      for (std::size_t k = 0; k < l; ++k) u[k] = st.beta[k] + prob.rho * (ax[k] + by[k] - c[k]);
      matvec_transpose_add(A, u, 1.0, grad);
      if (norm(grad) <= config.inner_tol) break;
      if (it == config.inner_max_iters) {
        ++unconverged;
        break;
      }
      axpy(-step, grad, st.x);
    }
    // one outer iteration counts as one pass over the data
    st.samples_visited += n;
    detail::check_finite(st.x, t, "batch_admm_solve");
    detail::finish_iteration(prob, st, ax, by);
    ++counters.outer_iterations;
    if (!detail::notify(hooks, "batch", t + 1, st, counters, res)) {
      res.stopped_by_observer = true;
      break;
    }
  }
  if (unconverged > 0)
    res.warnings.push_back("x-subproblem hit inner_max_iters in " + std::to_string(unconverged) +
                           " outer iterations");

  detail::finalize_result(res, prob, std::move(st), counters, arena.p_vectors());
  return res;
}

} // namespace scas
