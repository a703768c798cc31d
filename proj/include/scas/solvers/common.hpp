#pragma once

// Pieces shared by every ADMM solver: the iterate state, the closed-form
// y-update and dual update, projection onto a ball, run hooks, and the
// persistent-vector counter used for memory audits.

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scas/error.hpp"
#include "scas/linalg.hpp"
#include "scas/model.hpp"

namespace scas {

// ---------------------------------------------------------------------------
// randomness

using Rng = std::mt19937_64;

/// Uniform index in [0, n), unbiased.
inline std::size_t draw_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Independent stream seed for (base, a, b).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------
// proximal pieces

inline double soft_threshold(double v, double kappa) {
  if (!(kappa >= 0.0)) throw ConfigError("soft_threshold: kappa must be >= 0");
  if (v > kappa) return v - kappa;
  if (v < -kappa) return v + kappa;
  return 0.0;
}

/// True if B is exactly -I.
inline bool is_negative_identity(const CsrMatrix& b) {
  if (b.n_rows() != b.n_cols() || b.nnz() != b.n_rows()) return false;
  for (std::size_t r = 0; r < b.n_rows(); ++r) {
    const auto cols = b.row_cols(r);
    if (cols.size() != 1 || cols[0] != r || b.row_values(r)[0] != -1.0) return false;
  }
  return true;
}

inline void require_closed_form_y(const AdmmProblem& prob) {
  if (!is_negative_identity(prob.constraint.B))
    throw UnsupportedConstraint(
        "unsupported constraint: the y-update needs B = -I (constraint Ax - y = c)");
}

/// y = soft_threshold(Ax - c + beta/rho, lambda/rho), given Ax.
inline void y_update_from_ax(const AdmmProblem& prob, std::span<const double> ax,
                             std::span<const double> beta, std::span<double> y_out) {
  const auto& c = prob.constraint.c;
  const double kappa = prob.l1_strength / prob.rho;
  for (std::size_t k = 0; k < ax.size(); ++k)
    y_out[k] = soft_threshold(ax[k] - c[k] + beta[k] / prob.rho, kappa);
}

/// argmin_y L(x_new, y, beta) for g(y) = lambda ||y||_1 and B = -I.
inline Vector y_update(const AdmmProblem& prob, std::span<const double> x_new,
                       std::span<const double> beta) {
  require_closed_form_y(prob);
  require_size("y_update: beta", prob.l(), beta.size());
  const Vector ax = matvec(prob.constraint.A, x_new);
  Vector y(prob.l());
  y_update_from_ax(prob, ax, beta, y);
  return y;
}

// ---------------------------------------------------------------------------
// projection

struct ProjectionBall {
  Vector center;
  double radius = 1.0;

  double diameter() const noexcept { return 2.0 * radius; }

  static ProjectionBall origin(std::size_t p, double radius) { return {Vector(p, 0.0), radius}; }
};

/// Projects w onto the ball in place; returns true if w was outside.
inline bool project_in_place(const ProjectionBall& ball, std::span<double> w) {
  require_size("project", ball.center.size(), w.size());
  double d2 = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) d2 += (w[j] - ball.center[j]) * (w[j] - ball.center[j]);
  const double d = std::sqrt(d2);
  if (d <= ball.radius) return false;
  const double f = ball.radius / d;
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = ball.center[j] + f * (w[j] - ball.center[j]);
  return true;
}

inline Vector project(const ProjectionBall& ball, std::span<const double> w) {
  Vector out(w.begin(), w.end());
  project_in_place(ball, out);
  return out;
}

// ---------------------------------------------------------------------------
// state and results

struct AdmmState {
  Vector x, y, beta;
  std::size_t t = 0;  // completed iterations contributing to the averages
  Vector x_running_sum, y_running_sum;
  std::size_t samples_visited = 0;
  std::size_t gradient_evaluations = 0;

  static AdmmState zeros(std::size_t p, std::size_t q, std::size_t l) {
    return {Vector(p, 0.0), Vector(q, 0.0), Vector(l, 0.0), 0, Vector(p, 0.0), Vector(q, 0.0)};
  }

  Vector x_bar() const { return average(x_running_sum, x); }
  Vector y_bar() const { return average(y_running_sum, y); }

private:
  Vector average(const Vector& sum, const Vector& fallback) const {
    if (t == 0) return fallback;
    Vector out(sum);
    scale(1.0 / static_cast<double>(t), out);
    return out;
  }
};

/// beta + rho (A x + B y - c) for the state's current x, y.
inline Vector beta_update(const AdmmState& state, const AdmmProblem& prob) {
  const Vector r = constraint_residual(prob, state.x, state.y);
  Vector out(state.beta);
  axpy(prob.rho, r, out);
  return out;
}

/// Work done so far, broken down the way pass accounting needs it.
struct WorkCounters {
  std::size_t n = 0;
  std::size_t outer_iterations = 0;
  std::size_t full_gradient_samples = 0;  // samples touched by full gradients
  std::size_t stochastic_samples = 0;     // one per stochastic step
  std::size_t inner_budget = 0;           // SCAS: sum of M_t
  std::size_t table_init_samples = 0;     // SA: initial gradient table fill
};

struct Progress {
  std::string_view method;
  std::size_t iteration = 0;  // outer iterations (SCAS, batch) or stochastic steps
  const AdmmState& state;
  const WorkCounters& counters;
};

/// Return false to stop the run after this iteration.
using Observer = std::function<bool(const Progress&)>;

struct RunHooks {
  Observer observer;
  std::size_t stride = 0;  // per-sample methods: call observer every `stride` steps (0 = n)
  bool record_iterates = false;
};

struct InitialPoint {
  Vector x, y, beta;
};

struct SolveResult {
  Vector x_bar, y_bar;
  Vector y_of_x_bar;  // A x_bar, used in place of y_bar when scoring
  AdmmState state;
  WorkCounters counters;
  std::size_t persistent_p_vectors = 0;
  std::vector<std::string> warnings;
  std::vector<Vector> x_history;  // x_1, x_2, ... when requested
  bool stopped_by_observer = false;
};

// ---------------------------------------------------------------------------
// persistent storage accounting

/// Owns a solver's long-lived vectors and counts those of length p.
class VectorArena {
public:
  explicit VectorArena(std::size_t p) : p_(p) {}

  Vector& p_vector() {
    ++p_count_;
    return store_.emplace_back(p_, 0.0);
  }

  Vector& vector(std::size_t len) { return store_.emplace_back(len, 0.0); }

  /// Records p-vectors held outside the arena (the state's x and running sum).
  void account_external(std::size_t k) { p_count_ += k; }

  std::size_t p_vectors() const noexcept { return p_count_; }

private:
  std::size_t p_;
  std::size_t p_count_ = 0;
  std::deque<Vector> store_;
};

namespace detail {

inline AdmmState initial_state(const AdmmProblem& prob, const std::optional<InitialPoint>& init) {
  auto st = AdmmState::zeros(prob.p(), prob.q(), prob.l());
  if (init) {
    require_size("initial x", prob.p(), init->x.size());
    require_size("initial y", prob.q(), init->y.size());
    require_size("initial beta", prob.l(), init->beta.size());
    st.x = init->x;
    st.y = init->y;
    st.beta = init->beta;
  }
  return st;
}

/// Given a fresh state.x, applies the y- and beta-updates and folds the
/// iterate into the running averages. `ax` and `by` are l-length scratch.
inline void finish_iteration(const AdmmProblem& prob, AdmmState& st, Vector& ax, Vector& by) {
  matvec_into(prob.constraint.A, st.x, ax);
  y_update_from_ax(prob, ax, st.beta, st.y);
  matvec_into(prob.constraint.B, st.y, by);
  const auto& c = prob.constraint.c;
  for (std::size_t k = 0; k < st.beta.size(); ++k) st.beta[k] += prob.rho * (ax[k] + by[k] - c[k]);
  axpy(1.0, st.x, st.x_running_sum);
  axpy(1.0, st.y, st.y_running_sum);
  ++st.t;
}

inline void check_finite(const Vector& x, std::size_t iteration, const char* where) {
  if (!all_finite(x)) throw SolverAbort(iteration, norm(x), where);
}

inline void finalize_result(SolveResult& res, const AdmmProblem& prob, AdmmState&& st,
                            const WorkCounters& c, std::size_t p_vectors) {
  res.x_bar = st.x_bar();
  res.y_bar = st.y_bar();
  res.y_of_x_bar = matvec(prob.constraint.A, res.x_bar);
  res.state = std::move(st);
  res.counters = c;
  res.persistent_p_vectors = p_vectors;
}

/// Records the iterate if requested and forwards to the observer.
inline bool notify(const RunHooks& hooks, std::string_view method, std::size_t iteration,
                   const AdmmState& st, const WorkCounters& c, SolveResult& res) {
  if (hooks.record_iterates) res.x_history.push_back(st.x);
  if (!hooks.observer) return true;
  return hooks.observer(Progress{method, iteration, st, c});
}

} // namespace detail

} // namespace scas
