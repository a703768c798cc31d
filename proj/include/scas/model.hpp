#pragma once

// Finite-sum ADMM problems:
//
//   minimize  (1/n) sum_i f_i(x) + lambda ||y||_1   subject to  A x + B y = c
//
// with f_i a logistic or squared loss on sample (a_i, b_i) plus (mu/2)||x||^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "scas/error.hpp"
#include "scas/linalg.hpp"

namespace scas {

struct SampleSet {
  CsrMatrix features;  // n x p, row i is a_i
  Vector labels;       // b_i

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.n_cols(); }

  SampleSet subset(std::span<const std::size_t> rows) const {
    SampleSet out{features.select_rows(rows), {}};
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) out.labels.push_back(labels[r]);
    return out;
  }

  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

enum class LossKind { logistic, squared };

inline std::string to_string(LossKind k) { return k == LossKind::logistic ? "logistic" : "squared"; }

struct LossSpec {
  LossKind kind = LossKind::logistic;
  double l2_strength = 0.0;  // mu; > 0 makes f strongly convex

  bool strongly_convex() const noexcept { return l2_strength > 0.0; }
};

struct ConstraintSpec {
  CsrMatrix A;  // l x p
  CsrMatrix B;  // l x q
  Vector c;     // l

  std::size_t l() const noexcept { return c.size(); }
  std::size_t p() const noexcept { return A.n_cols(); }
  std::size_t q() const noexcept { return B.n_cols(); }
};

struct AdmmProblem {
  SampleSet samples;
  LossSpec loss;
  double l1_strength = 0.0;  // lambda
  ConstraintSpec constraint;
  double rho = 1.0;

  std::size_t n() const noexcept { return samples.size(); }
  std::size_t p() const noexcept { return samples.dim(); }
  std::size_t q() const noexcept { return constraint.q(); }
  std::size_t l() const noexcept { return constraint.l(); }

  /// Throws ConfigError/DimensionError if the problem is malformed.
  void validate() const {
    if (samples.size() == 0) throw ConfigError("problem has no samples");
    require_size("feature rows vs labels", samples.features.n_rows(), samples.labels.size());
    if (loss.kind == LossKind::logistic) {
      for (double b : samples.labels)
        if (b != 1.0 && b != -1.0) throw ConfigError("logistic loss needs labels in {-1,+1}");
    }
    if (!(loss.l2_strength >= 0.0)) throw ConfigError("l2 strength mu must be >= 0");
    if (!(l1_strength >= 0.0)) throw ConfigError("l1 strength lambda must be >= 0");
    if (!(rho > 0.0)) throw ConfigError("penalty rho must be > 0");
    require_size("A columns vs feature dimension", p(), constraint.A.n_cols());
    require_size("A rows vs len(c)", constraint.c.size(), constraint.A.n_rows());
    require_size("B rows vs len(c)", constraint.c.size(), constraint.B.n_rows());
  }
};

// ---------------------------------------------------------------------------
// scalar loss pieces as functions of the margin z = a^T x

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double margin_loss(LossKind kind, double label, double z) {
  if (kind == LossKind::logistic) return softplus(-label * z);
  const double r = label - z;
  return r * r;
}

/// d/dz of margin_loss.
inline double margin_loss_derivative(LossKind kind, double label, double z) {
  if (kind == LossKind::logistic) return -label * sigmoid(-label * z);
  return -2.0 * (label - z);
}

inline void check_index(const AdmmProblem& prob, std::size_t i) {
  if (i >= prob.n())
    throw DimensionError("sample index out of range (expected < n)", prob.n(), i);
}

// ---------------------------------------------------------------------------
// per-sample oracles

inline double sample_loss(const AdmmProblem& prob, std::size_t i, std::span<const double> x) {
  check_index(prob, i);
  require_size("sample_loss", prob.p(), x.size());
  const double z = prob.samples.features.row_dot(i, x);
  return margin_loss(prob.loss.kind, prob.samples.labels[i], z) +
         0.5 * prob.loss.l2_strength * norm_sq(x);
}

/// Scalar d_i with grad f_i(x) = d_i a_i + mu x.
inline double sample_grad_coefficient(const AdmmProblem& prob, std::size_t i,
                                      std::span<const double> x) {
  const double z = prob.samples.features.row_dot(i, x);
  return margin_loss_derivative(prob.loss.kind, prob.samples.labels[i], z);
}

inline Vector sample_grad(const AdmmProblem& prob, std::size_t i, std::span<const double> x) {
  check_index(prob, i);
  require_size("sample_grad", prob.p(), x.size());
  Vector g(prob.p(), 0.0);
  prob.samples.features.add_row_to(i, sample_grad_coefficient(prob, i, x), g);
  axpy(prob.loss.l2_strength, x, g);
  return g;
}

/// out = (1/n) sum_i grad f_i(x), summed in ascending i.
inline void full_grad_into(const AdmmProblem& prob, std::span<const double> x,
                           std::span<double> out) {
  require_size("full_grad", prob.p(), x.size());
  require_size("full_grad output", prob.p(), out.size());
  std::fill(out.begin(), out.end(), 0.0);
  const auto& a = prob.samples.features;
  for (std::size_t i = 0; i < prob.n(); ++i)
    a.add_row_to(i, sample_grad_coefficient(prob, i, x), out);
  scale(1.0 / static_cast<double>(prob.n()), out);
  axpy(prob.loss.l2_strength, x, out);
}

inline Vector full_grad(const AdmmProblem& prob, std::span<const double> x) {
  Vector g(prob.p());
  full_grad_into(prob, x, g);
  return g;
}

/// f(x) = (1/n) sum_i f_i(x)
inline double mean_loss(const AdmmProblem& prob, std::span<const double> x) {
  require_size("mean_loss", prob.p(), x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < prob.n(); ++i)
    s += margin_loss(prob.loss.kind, prob.samples.labels[i], prob.samples.features.row_dot(i, x));
  return s / static_cast<double>(prob.n()) + 0.5 * prob.loss.l2_strength * norm_sq(x);
}

/// Unregularized mean loss of x on an arbitrary sample set.
inline double mean_data_loss(LossKind kind, const SampleSet& set, std::span<const double> x) {
  require_size("mean_data_loss", set.dim(), x.size());
  if (set.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    s += margin_loss(kind, set.labels[i], set.features.row_dot(i, x));
  return s / static_cast<double>(set.size());
}

// ---------------------------------------------------------------------------
// objective and augmented Lagrangian

inline Vector constraint_residual(const AdmmProblem& prob, std::span<const double> x,
                                  std::span<const double> y) {
  const auto& con = prob.constraint;
  require_size("constraint_residual: y", con.q(), y.size());
  Vector r = matvec(con.A, x);
  axpy(1.0, matvec(con.B, y), r);
  axpy(-1.0, con.c, r);
  return r;
}

/// P(x, y) = f(x) + lambda ||y||_1
inline double objective(const AdmmProblem& prob, std::span<const double> x,
                        std::span<const double> y) {
  require_size("objective: y", prob.q(), y.size());
  return mean_loss(prob, x) + prob.l1_strength * norm1(y);
}

inline double augmented_lagrangian(const AdmmProblem& prob, std::span<const double> x,
                                   std::span<const double> y, std::span<const double> beta) {
  require_size("augmented_lagrangian: beta", prob.l(), beta.size());
  const Vector r = constraint_residual(prob, x, y);
  return objective(prob, x, y) + dot(beta, r) + 0.5 * prob.rho * norm_sq(r);
}

/// Gradient in x of L(x, y, beta): grad f(x) + A^T beta + rho A^T (Ax + By - c).
inline Vector lagrangian_grad(const AdmmProblem& prob, std::span<const double> x,
                              std::span<const double> y, std::span<const double> beta) {
  require_size("lagrangian_grad: beta", prob.l(), beta.size());
  Vector g = full_grad(prob, x);
  Vector u = constraint_residual(prob, x, y);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = beta[k] + prob.rho * u[k];
  matvec_transpose_add(prob.constraint.A, u, 1.0, g);
  return g;
}

// ---------------------------------------------------------------------------
// smoothness constants

/// nu_f valid for every f_i: logistic max||a_i||^2/4 + mu, squared 2 max||a_i||^2 + mu.
inline double smoothness_constant(const AdmmProblem& prob) {
  if (prob.n() == 0) throw ConfigError("smoothness_constant: empty sample set");
  double m = 0.0;
  for (std::size_t i = 0; i < prob.n(); ++i) m = std::max(m, prob.samples.features.row_norm_sq(i));
  const double curvature = prob.loss.kind == LossKind::logistic ? 0.25 : 2.0;
  return curvature * m + prob.loss.l2_strength;
}

struct LipschitzEstimate {
  double value = 0.0;
  bool converged = true;  // false if the eigenvalue estimate hit its iteration cap
};

/// nu_L = nu_f + rho * lambda_max(A^T A), the smoothness of x -> L(x, y, beta).
inline LipschitzEstimate nu_L(const AdmmProblem& prob) {
  const auto eig = gram_top_eigenvalue(prob.constraint.A);
  return {smoothness_constant(prob) + prob.rho * eig.value, eig.converged};
}

} // namespace scas
