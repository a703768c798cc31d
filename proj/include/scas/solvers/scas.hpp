#pragma once

// SCAS-ADMM: stochastic ADMM whose x-update runs an SVRG-style inner loop on
// the augmented Lagrangian, so no per-sample gradient table is kept.
//
//   w_{m+1} = proj_X(w_m - eta [grad f_i(w_m) - grad f_i(w_0) + z_t
//                               + A^T beta_t + rho A^T (A w_m + B y_t - c)])
//
// with z_t the full gradient at w_0 = x_t.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "scas/linalg.hpp"
#include "scas/model.hpp"
#include "scas/solvers/common.hpp"
#include "scas/solvers/schedule.hpp"

namespace scas {

/// Computes the bracketed direction p_{m,t} of the inner update for a fixed
/// outer iterate (w_0, z_t, y_t, beta_t).
class ScasDirection {
public:
  explicit ScasDirection(const AdmmProblem& prob)
      : prob_(&prob), u_(prob.l()), aw_(prob.l()), by_(prob.l()) {}

  /// Fixes the outer-iteration quantities. w0 and z must outlive the calls.
  void bind(std::span<const double> w0, std::span<const double> z, std::span<const double> y,
            std::span<const double> beta) {
    const auto& con = prob_->constraint;
    require_size("direction: w0", prob_->p(), w0.size());
    require_size("direction: z", prob_->p(), z.size());
    require_size("direction: beta", prob_->l(), beta.size());
    w0_ = w0;
    z_ = z;
    matvec_into(con.B, y, by_);
    for (std::size_t k = 0; k < u_.size(); ++k)
      u_[k] = beta[k] + prob_->rho * (by_[k] - con.c[k]);
  }

  /// out = grad f_i(w) - grad f_i(w0) + z + A^T (beta + rho (A w + B y - c))
  void operator()(std::span<const double> w, std::size_t i, std::span<double> out) {
    const auto& a = prob_->samples.features;
    const double dw = sample_grad_coefficient(*prob_, i, w);
    const double d0 = sample_grad_coefficient(*prob_, i, w0_);
    const double mu = prob_->loss.l2_strength;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = z_[j] + mu * (w[j] - w0_[j]);
    a.add_row_to(i, dw - d0, out);
    add_constraint_term(w, out);
  }

  /// out = grad_x L(w, y_t, beta_t) given z = grad f(w); used for G_t.
  void lagrangian_gradient(std::span<const double> w, std::span<double> out) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = z_[j];
    add_constraint_term(w, out);
  }

private:
  void add_constraint_term(std::span<const double> w, std::span<double> out) {
    const auto& A = prob_->constraint.A;
    matvec_into(A, w, aw_);
    for (std::size_t k = 0; k < aw_.size(); ++k) aw_[k] = prob_->rho * aw_[k] + u_[k];
    matvec_transpose_add(A, aw_, 1.0, out);
  }

  const AdmmProblem* prob_;
  std::span<const double> w0_, z_;
  Vector u_, aw_, by_;
};

/// p_{m,t} for a single sample index (allocating convenience form).
inline Vector gradient_estimate(const AdmmProblem& prob, std::span<const double> w_m,
                                std::span<const double> w_0, std::span<const double> z_t,
                                std::span<const double> y_t, std::span<const double> beta_t,
                                std::size_t i_m) {
  check_index(prob, i_m);
  require_size("gradient_estimate: w_m", prob.p(), w_m.size());
  ScasDirection dir(prob);
  dir.bind(w_0, z_t, y_t, beta_t);
  Vector out(prob.p());
  dir(w_m, i_m, out);
  return out;
}

/// One inner update w_{m+1} = proj(w_m - eta p_{m,t}). No ball means no projection.
inline Vector inner_step(const AdmmProblem& prob, std::span<const double> w_m,
                         std::span<const double> w_0, std::span<const double> z_t,
                         std::span<const double> y_t, std::span<const double> beta_t, double eta,
                         std::size_t i_m, const std::optional<ProjectionBall>& ball = {}) {
  if (!(eta > 0.0)) throw ConfigError("inner_step: eta must be > 0");
  Vector w = gradient_estimate(prob, w_m, w_0, z_t, y_t, beta_t, i_m);
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = w_m[j] - eta * w[j];
  if (ball) project_in_place(*ball, w);
  return w;
}

struct ScasOptions {
  std::optional<InitialPoint> init;
  /// Doubles the ball radius and redoes the outer iteration when more than
  /// half of its inner steps hit the boundary.
  bool auto_enlarge_ball = false;
  std::size_t max_ball_enlargements = 20;
  /// Receives every vector added to the inner-loop sum s (instrumentation).
  std::function<void(std::span<const double>)> on_average_term;
};

namespace detail {

inline void validate_ball(const ProjectionBall& ball, std::span<const double> x0) {
  require_size("projection ball center", x0.size(), ball.center.size());
  if (!(ball.radius > 0.0)) throw ConfigError("projection ball radius must be > 0");
  double d2 = 0.0;
  for (std::size_t j = 0; j < x0.size(); ++j) d2 += (x0[j] - ball.center[j]) * (x0[j] - ball.center[j]);
  if (std::sqrt(d2) > ball.radius) throw ConfigError("projection ball must contain the initial point");
}
} // namespace detail

/// SCAS-ADMM for general convex f (inner loop averages w_0 .. w_{M_t - 1}).
inline SolveResult scas_general_solve(const AdmmProblem& prob, const Schedule& schedule,
                                      ProjectionBall ball, std::uint64_t seed, std::size_t T,
                                      const RunHooks& hooks = {}, const ScasOptions& opts = {}) {
  prob.validate();
  require_closed_form_y(prob);
  if (T == 0) throw ConfigError("scas_general_solve: T must be >= 1");
  const std::size_t n = prob.n(), p = prob.p(), l = prob.l();

  AdmmState st = detail::initial_state(prob, opts.init);
  detail::validate_ball(ball, st.x);

  VectorArena arena(p);
  arena.account_external(2);  // st.x, st.x_running_sum
  Vector& z = arena.p_vector();
  Vector& w0 = arena.p_vector();
  Vector& w = arena.p_vector();
  Vector& g = arena.p_vector();
  Vector& s = arena.p_vector();
  Vector& ax = arena.vector(l);
  Vector& by = arena.vector(l);

  Rng rng(seed);
  ScasDirection dir(prob);
  WorkCounters counters;
  counters.n = n;
  SolveResult res;
  Schedule sched = schedule;
  std::size_t enlargements = 0;

  for (std::size_t t = 0; t < T; ++t) {
    full_grad_into(prob, st.x, z);
    counters.full_gradient_samples += n;
    st.samples_visited += n;
    st.gradient_evaluations += n;
    w0 = st.x;
    dir.bind(w0, z, st.y, st.beta);

    double g_t = 0.0;
    if (sched.mode == ScheduleMode::theoretical) {
      dir.lagrangian_gradient(w0, g);
      g_t = norm(g);
    }

    StepPlan plan;
    for (;;) {
      if (sched.mode == ScheduleMode::theoretical) sched.D = ball.diameter();
      plan = schedule_eta_M(sched, t, g_t, n);
      w = w0;
      s = w0;
      if (opts.on_average_term) opts.on_average_term(w0);
      std::size_t hits = 0;
      for (std::size_t m = 0; m + 1 < plan.M; ++m) {
        const std::size_t i = draw_index(rng, n);
        dir(w, i, g);
        for (std::size_t j = 0; j < p; ++j) g[j] = w[j] - plan.eta * g[j];
        if (project_in_place(ball, g)) ++hits;
        axpy(1.0, g, s);
        if (opts.on_average_term) opts.on_average_term(g);
        std::swap(w, g);
      }
      const std::size_t steps = plan.M - 1;
      counters.stochastic_samples += steps;
      st.samples_visited += steps;
      st.gradient_evaluations += 2 * steps;
      if (opts.auto_enlarge_ball && steps > 0 && 2 * hits > steps &&
          enlargements < opts.max_ball_enlargements) {
        ball.radius *= 2.0;
        ++enlargements;
        res.warnings.push_back("outer iteration " + std::to_string(t) +
                               ": projection active on most inner steps, radius doubled to " +
                               std::to_string(ball.radius));
        continue;
      }
      break;
    }

    for (std::size_t j = 0; j < p; ++j) st.x[j] = s[j] / static_cast<double>(plan.M);
    detail::check_finite(st.x, t, "scas_general_solve");
    detail::finish_iteration(prob, st, ax, by);
    ++counters.outer_iterations;
    counters.inner_budget += plan.M;
    if (!detail::notify(hooks, "scas", t + 1, st, counters, res)) {
      res.stopped_by_observer = true;
      break;
    }
  }

  detail::finalize_result(res, prob, std::move(st), counters, arena.p_vectors());
  return res;
}

// ---------------------------------------------------------------------------
// strongly convex variant

/// Constants of the strongly convex variant. r + s = 2 eta.
struct StrongParams {
  double eta = 0.0;
  std::size_t M = 0;
  double r = 0.0;
  double s = 0.0;
  double alpha = 0.0;
  double mu_f = 0.0;
  double mu_L = 0.0;
  double lambda1 = 0.0;  // largest eigenvalue of A^T A
  double nu_L = 0.0;
  double rho = 0.0;
};

inline StrongParams make_strong_params(double eta, std::size_t M, double nu_L, double mu_f,
                                       double mu_L, double lambda1, double rho) {
  if (!(eta > 0.0)) throw ConfigError("strong params: eta must be > 0");
  if (M == 0) throw ConfigError("strong params: M must be >= 1");
  StrongParams sp;
  sp.eta = eta;
  sp.M = M;
  sp.nu_L = nu_L;
  sp.mu_f = mu_f;
  sp.mu_L = mu_L;
  sp.lambda1 = lambda1;
  sp.rho = rho;
  sp.s = eta / (1.0 - nu_L * eta / 2.0);
  sp.r = 2.0 * eta - sp.s;
  sp.alpha = 1.0 - rho * lambda1 * sp.s / 2.0 - mu_f * sp.s / 4.0;
  return sp;
}

/// Derives nu_L, lambda_max(A^T A) and mu_L = mu_f + rho lambda_min(A^T A) from the problem.
inline StrongParams strong_params_for(const AdmmProblem& prob, double eta, std::size_t M) {
  const double lambda1 = gram_top_eigenvalue(prob.constraint.A).value;
  const double lambda_min = gram_bottom_eigenvalue(prob.constraint.A).value;
  const double mu_f = prob.loss.l2_strength;
  return make_strong_params(eta, M, nu_L(prob).value, mu_f, mu_f + prob.rho * lambda_min, lambda1,
                            prob.rho);
}

struct ConditionCheck {
  std::string name;
  bool pass = false;
  double slack = 0.0;  // positive is the satisfied side
};

struct ValidationReport {
  std::array<ConditionCheck, 3> conditions;

  bool all_pass() const {
    return conditions[0].pass && conditions[1].pass && conditions[2].pass;
  }
};

/// Checks the step-size / inner-length conditions of the strongly convex analysis:
///   (a) eta - nu_L eta^2 / 2 > 0
///   (b) (4 nu_L^2 + mu_f nu_L / 2) eta + rho lambda1 <= mu_L
///   (c) alpha / (2 M eta) + 2 nu_L^2 eta / (2 - nu_L eta) <= mu_f / 4
/// Report only; solvers never refuse to run on a failed check.
inline ValidationReport validate_strong_params(const StrongParams& sp) {
  ValidationReport rep;
  const double eta = sp.eta, nu = sp.nu_L;

  const double slack_a = eta - nu * eta * eta / 2.0;
  rep.conditions[0] = {"eta - nu_L eta^2 / 2 > 0", slack_a > 0.0, slack_a};

  const double slack_b = sp.mu_L - ((4.0 * nu * nu + sp.mu_f * nu / 2.0) * eta + sp.rho * sp.lambda1);
  rep.conditions[1] = {"(4 nu_L^2 + mu_f nu_L / 2) eta + rho lambda1 <= mu_L", slack_b >= 0.0,
                       slack_b};

  const double denom = 2.0 - nu * eta;
  double slack_c = -std::numeric_limits<double>::infinity();
  if (denom > 0.0) {
    const double lhs = sp.alpha / (2.0 * static_cast<double>(sp.M) * eta) +
                       2.0 * nu * nu * eta / denom;
    slack_c = sp.mu_f / 4.0 - lhs;
  }
  rep.conditions[2] = {"alpha / (2 M eta) + 2 nu_L^2 eta / (2 - nu_L eta) <= mu_f / 4",
                       slack_c >= 0.0, slack_c};
  return rep;
}

/// SCAS-ADMM for strongly convex f: constant eta and M, and the inner sum
/// accumulates (r w_m + s w_{m+1}) / (2 eta).
inline SolveResult scas_strong_solve(const AdmmProblem& prob, const StrongParams& params,
                                     const std::optional<ProjectionBall>& ball, std::uint64_t seed,
                                     std::size_t T, const RunHooks& hooks = {},
                                     const ScasOptions& opts = {}) {
  prob.validate();
  require_closed_form_y(prob);
  if (!(prob.loss.l2_strength > 0.0))
    throw ConfigError("scas_strong_solve needs a strongly convex loss (mu > 0)");
  if (!(params.eta > 0.0) || params.M == 0) throw ConfigError("scas_strong_solve: need eta > 0, M >= 1");
  if (params.r < 0.0)
    throw ConfigError("scas_strong_solve: r < 0; the step size must satisfy nu_L * eta <= 1");
  if (T == 0) throw ConfigError("scas_strong_solve: T must be >= 1");
  const std::size_t n = prob.n(), p = prob.p(), l = prob.l();

  AdmmState st = detail::initial_state(prob, opts.init);
  if (ball) detail::validate_ball(*ball, st.x);

  VectorArena arena(p);
  arena.account_external(2);
  Vector& z = arena.p_vector();
  Vector& w0 = arena.p_vector();
  Vector& w = arena.p_vector();
  Vector& g = arena.p_vector();
  Vector& s = arena.p_vector();
  Vector& ax = arena.vector(l);
  Vector& by = arena.vector(l);

  const double eta = params.eta;
  const double cw = params.r / (2.0 * eta);  // weight of w_m
  const double cn = params.s / (2.0 * eta);  // weight of w_{m+1}
  Rng rng(seed);
  ScasDirection dir(prob);
  WorkCounters counters;
  counters.n = n;
  SolveResult res;

  for (std::size_t t = 0; t < T; ++t) {
    full_grad_into(prob, st.x, z);
    counters.full_gradient_samples += n;
    st.samples_visited += n;
    st.gradient_evaluations += n;
    w0 = st.x;
    dir.bind(w0, z, st.y, st.beta);
    w = w0;
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t m = 0; m < params.M; ++m) {
      const std::size_t i = draw_index(rng, n);
      dir(w, i, g);
      for (std::size_t j = 0; j < p; ++j) g[j] = w[j] - eta * g[j];
      if (ball) project_in_place(*ball, g);
      // w now holds w_m and g holds w_{m+1}; w becomes the averaged term.
      for (std::size_t j = 0; j < p; ++j) {
        w[j] = cw * w[j] + cn * g[j];
        s[j] += w[j];
      }
      if (opts.on_average_term) opts.on_average_term(w);
      std::swap(w, g);
    }
    counters.stochastic_samples += params.M;
    st.samples_visited += params.M;
    st.gradient_evaluations += 2 * params.M;

    for (std::size_t j = 0; j < p; ++j) st.x[j] = s[j] / static_cast<double>(params.M);
    detail::check_finite(st.x, t, "scas_strong_solve");
    detail::finish_iteration(prob, st, ax, by);
    ++counters.outer_iterations;
    counters.inner_budget += params.M;
    if (!detail::notify(hooks, "scas-strong", t + 1, st, counters, res)) {
      res.stopped_by_observer = true;
      break;
    }
  }

  detail::finalize_result(res, prob, std::move(st), counters, arena.p_vectors());
  return res;
}

} // namespace scas
