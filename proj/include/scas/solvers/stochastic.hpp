#pragma once

// Per-sample stochastic ADMM baselines. Both keep the penalty term exact and
// solve the x-subproblem
//
//   argmin_x g^T x + beta^T A x + (rho/2)||Ax + By - c||^2 + ||x - x_k||^2 / (2 eta)
//
// i.e. (I/eta + rho A^T A) x = x_k/eta - g - A^T (beta + rho (By - c)),
// by conjugate gradient warm-started at x_k.
//
//   STOC-ADMM: g = grad f_i(x_k), eta_k = eta0 / sqrt(k + 1)
//   SA-ADMM:   g = average of the last gradient seen for every sample, constant eta

#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "scas/linalg.hpp"
#include "scas/model.hpp"
#include "scas/solvers/common.hpp"

namespace scas {

/// Solver for the linearized-loss, exact-penalty x-subproblem.
class PenalizedProximalStep {
public:
  PenalizedProximalStep(const AdmmProblem& prob, VectorArena& arena, double cg_tol,
                        std::size_t cg_max_iters)
      : prob_(&prob), rhs_(arena.p_vector()), u_(arena.vector(prob.l())),
        tmp_(arena.vector(prob.l())), cg_tol_(cg_tol),
        cg_max_(cg_max_iters ? cg_max_iters : 10 * prob.p() + 50) {
    ws_.resize(prob.p());
    arena.account_external(3);  // CG scratch r, p, q
  }

  /// On entry x = x_k; on exit x = x_{k+1}.
  CgResult solve(std::span<const double> g, double eta, std::span<const double> y,
                 std::span<const double> beta, std::span<double> x) {
    const auto& con = prob_->constraint;
    const double rho = prob_->rho;
    matvec_into(con.B, y, u_);
    for (std::size_t k = 0; k < u_.size(); ++k) u_[k] = beta[k] + rho * (u_[k] - con.c[k]);
    for (std::size_t j = 0; j < rhs_.size(); ++j) rhs_[j] = x[j] / eta - g[j];
    matvec_transpose_add(con.A, u_, -1.0, rhs_);
    const double inv_eta = 1.0 / eta;
    auto op = [&](std::span<const double> in, std::span<double> out) {
      matvec_into(con.A, in, tmp_);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = inv_eta * in[j];
      matvec_transpose_add(con.A, tmp_, rho, out);
    };
    return conjugate_gradient(op, rhs_, x, cg_tol_, cg_max_, ws_);
  }

private:
  const AdmmProblem* prob_;
  Vector& rhs_;
  Vector& u_;
  Vector& tmp_;
  CgWorkspace ws_;
  double cg_tol_;
  std::size_t cg_max_;
};

/// Last-seen gradient per sample and their running mean.
class GradientTable {
public:
  /// Fills every entry with grad f_i(x0).
  GradientTable(const AdmmProblem& prob, std::span<const double> x0, VectorArena& arena)
      : prob_(&prob), average_(arena.p_vector()), scratch_(arena.p_vector()) {
    table_.reserve(prob.n());
    for (std::size_t i = 0; i < prob.n(); ++i) {
      Vector& e = arena.p_vector();
      write_gradient(i, x0, e);
      table_.push_back(&e);
    }
    average_ = recomputed_average();
  }

  /// Replaces entry i with grad f_i(x) and updates the mean incrementally.
  void refresh(std::size_t i, std::span<const double> x) {
    write_gradient(i, x, scratch_);
    Vector& old = *table_[i];
    const double inv_n = 1.0 / static_cast<double>(table_.size());
    for (std::size_t j = 0; j < average_.size(); ++j) average_[j] += inv_n * (scratch_[j] - old[j]);
    std::swap(old, scratch_);
  }

  const Vector& average() const noexcept { return average_; }
  const Vector& entry(std::size_t i) const { return *table_.at(i); }
  std::size_t size() const noexcept { return table_.size(); }

  Vector recomputed_average() const {
    Vector avg(prob_->p(), 0.0);
    for (const Vector* e : table_) axpy(1.0, *e, avg);
    scale(1.0 / static_cast<double>(table_.size()), avg);
    return avg;
  }

  /// Sets the running mean to the exact table mean (drift control).
  void resync() { average_ = recomputed_average(); }

private:
  void write_gradient(std::size_t i, std::span<const double> x, Vector& out) const {
    const double d = sample_grad_coefficient(*prob_, i, x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = prob_->loss.l2_strength * x[j];
    prob_->samples.features.add_row_to(i, d, out);
  }

  const AdmmProblem* prob_;
  Vector& average_;
  Vector& scratch_;
  std::vector<Vector*> table_;
};

struct StocConfig {
  double eta0 = 0.1;
  double cg_tol = 1e-10;
  std::size_t cg_max_iters = 0;  // 0 = 10 p + 50
  std::optional<InitialPoint> init;
};

struct SaConfig {
  double eta = 0.1;
  double cg_tol = 1e-10;
  std::size_t cg_max_iters = 0;
  std::optional<InitialPoint> init;
};

namespace detail {

inline void finish_stochastic(SolveResult& res, std::size_t cg_failures) {
  if (cg_failures > 0)
    res.warnings.push_back("conjugate gradient did not reach tolerance in " +
                           std::to_string(cg_failures) + " x-updates; kept the last iterate");
}

} // namespace detail

/// STOC-ADMM, run for T_passes * n single-sample iterations.
inline SolveResult stoc_admm_solve(const AdmmProblem& prob, const StocConfig& config,
                                   std::uint64_t seed, std::size_t T_passes,
                                   const RunHooks& hooks = {}) {
  prob.validate();
  require_closed_form_y(prob);
  if (T_passes == 0) throw ConfigError("stoc_admm_solve: T_passes must be >= 1");
  if (!(config.eta0 > 0.0)) throw ConfigError("stoc_admm_solve: eta0 must be > 0");
  const std::size_t n = prob.n(), p = prob.p(), l = prob.l();

  AdmmState st = detail::initial_state(prob, config.init);
  VectorArena arena(p);
  arena.account_external(2);
  Vector& g = arena.p_vector();
  Vector& ax = arena.vector(l);
  Vector& by = arena.vector(l);
  PenalizedProximalStep xstep(prob, arena, config.cg_tol, config.cg_max_iters);

  Rng rng(seed);
  WorkCounters counters;
  counters.n = n;
  SolveResult res;
  const std::size_t stride = hooks.stride ? hooks.stride : n;
  const std::size_t total = T_passes * n;
  std::size_t cg_failures = 0;

  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t i = draw_index(rng, n);
    const double d = sample_grad_coefficient(prob, i, st.x);
    for (std::size_t j = 0; j < p; ++j) g[j] = prob.loss.l2_strength * st.x[j];
    prob.samples.features.add_row_to(i, d, g);
    const double eta = config.eta0 / std::sqrt(static_cast<double>(k + 1));
    if (!xstep.solve(g, eta, st.y, st.beta, st.x).converged) ++cg_failures;
    ++counters.stochastic_samples;
    ++st.samples_visited;
    ++st.gradient_evaluations;
    detail::finish_iteration(prob, st, ax, by);
    if ((k + 1) % stride == 0 || k + 1 == total) {
      detail::check_finite(st.x, k, "stoc_admm_solve");
      if (!detail::notify(hooks, "stoc", k + 1, st, counters, res)) {
        res.stopped_by_observer = true;
        break;
      }
    }
  }
  detail::finish_stochastic(res, cg_failures);
  detail::finalize_result(res, prob, std::move(st), counters, arena.p_vectors());
  return res;
}

/// SA-ADMM: one pass fills the gradient table at x_0, then T_passes * n iterations.
inline SolveResult sa_admm_solve(const AdmmProblem& prob, const SaConfig& config,
                                 std::uint64_t seed, std::size_t T_passes,
                                 const RunHooks& hooks = {}) {
  prob.validate();
  require_closed_form_y(prob);
  if (T_passes == 0) throw ConfigError("sa_admm_solve: T_passes must be >= 1");
  if (!(config.eta > 0.0)) throw ConfigError("sa_admm_solve: eta must be > 0");
  const std::size_t n = prob.n(), p = prob.p(), l = prob.l();

  AdmmState st = detail::initial_state(prob, config.init);
  VectorArena arena(p);
  arena.account_external(2);
  Vector& ax = arena.vector(l);
  Vector& by = arena.vector(l);
  PenalizedProximalStep xstep(prob, arena, config.cg_tol, config.cg_max_iters);
  GradientTable table(prob, st.x, arena);

  WorkCounters counters;
  counters.n = n;
  counters.table_init_samples = n;
  st.samples_visited += n;
  st.gradient_evaluations += n;

  Rng rng(seed);
  SolveResult res;
  const std::size_t stride = hooks.stride ? hooks.stride : n;
  const std::size_t total = T_passes * n;
  std::size_t cg_failures = 0;

  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t i = draw_index(rng, n);
    table.refresh(i, st.x);
    if (!xstep.solve(table.average(), config.eta, st.y, st.beta, st.x).converged) ++cg_failures;
    ++counters.stochastic_samples;
    ++st.samples_visited;
    ++st.gradient_evaluations;
    detail::finish_iteration(prob, st, ax, by);
    if ((k + 1) % stride == 0 || k + 1 == total) {
      detail::check_finite(st.x, k, "sa_admm_solve");
      if (!detail::notify(hooks, "sa", k + 1, st, counters, res)) {
        res.stopped_by_observer = true;
        break;
      }
    }
  }
  detail::finish_stochastic(res, cg_failures);
  detail::finalize_result(res, prob, std::move(st), counters, arena.p_vectors());
  return res;
}

} // namespace scas
