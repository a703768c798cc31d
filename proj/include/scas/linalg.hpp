#pragma once

// Sparse/dense linear algebra used by the solvers.
//
// All reductions run in a fixed order (row-major, ascending column index) so a
// solver run is bit-reproducible for a given seed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scas/error.hpp"

namespace scas {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// dense helpers

inline void require_size(const char* what, std::size_t expected, std::size_t actual) {
  if (expected != actual) throw DimensionError(what, expected, actual);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_size("dot", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

inline double norm1(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_size("axpy", y.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  require_size("max_abs_diff", a.size(), b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Vector add(std::span<const double> a, std::span<const double> b) {
  require_size("add", a.size(), b.size());
  Vector out(a.begin(), a.end());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += b[i];
  return out;
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
  require_size("subtract", a.size(), b.size());
  Vector out(a.begin(), a.end());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] -= b[i];
  return out;
}

// ---------------------------------------------------------------------------
// CSR storage

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

class CsrMatrix {
public:
  CsrMatrix() : row_offsets_{0} {}

  /// Takes ownership of raw CSR arrays; throws ConfigError if they are inconsistent.
  CsrMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, Vector values)
      : n_rows_(n_rows), n_cols_(n_cols), row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)), values_(std::move(values)) {
    validate();
  }

  /// Builds from (row, col, value) entries in any order. Duplicates are summed.
  static CsrMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                 std::vector<Triplet> entries) {
    for (const auto& e : entries) {
      if (e.row >= n_rows || e.col >= n_cols)
        throw ConfigError("triplet (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                          ") outside " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> offsets(n_rows + 1, 0);
    std::vector<std::size_t> cols;
    Vector vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    std::size_t k = 0;
    for (std::size_t r = 0; r < n_rows; ++r) {
      while (k < entries.size() && entries[k].row == r) {
        const std::size_t c = entries[k].col;
        double v = 0.0;
        while (k < entries.size() && entries[k].row == r && entries[k].col == c)
          v += entries[k++].value;
        cols.push_back(c);
        vals.push_back(v);
      }
      offsets[r + 1] = cols.size();
    }
    return CsrMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
  }

  static CsrMatrix identity(std::size_t n, double diag = 1.0) {
    std::vector<std::size_t> offsets(n + 1), cols(n);
    for (std::size_t i = 0; i < n; ++i) {
      offsets[i + 1] = i + 1;
      cols[i] = i;
    }
    return CsrMatrix(n, n, std::move(offsets), std::move(cols), Vector(n, diag));
  }

  static CsrMatrix zeros(std::size_t n_rows, std::size_t n_cols) {
    return CsrMatrix(n_rows, n_cols, std::vector<std::size_t>(n_rows + 1, 0), {}, {});
  }

  /// Row-major dense input; exact zeros are dropped.
  static CsrMatrix from_dense(std::size_t n_rows, std::size_t n_cols,
                              std::span<const double> row_major) {
    require_size("from_dense", n_rows * n_cols, row_major.size());
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < n_rows; ++r)
      for (std::size_t c = 0; c < n_cols; ++c)
        if (row_major[r * n_cols + c] != 0.0) t.push_back({r, c, row_major[r * n_cols + c]});
    return from_triplets(n_rows, n_cols, std::move(t));
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  const std::vector<std::size_t>& row_offsets() const noexcept { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const noexcept { return col_indices_; }
  const Vector& values() const noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_indices_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }

  /// Sparse row dot dense vector.
  double row_dot(std::size_t r, std::span<const double> v) const {
    double s = 0.0;
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      s += values_[k] * v[col_indices_[k]];
    return s;
  }

  double row_norm_sq(std::size_t r) const {
    double s = 0.0;
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      s += values_[k] * values_[k];
    return s;
  }

  /// v += alpha * row r
  void add_row_to(std::size_t r, double alpha, std::span<double> v) const {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      v[col_indices_[k]] += alpha * values_[k];
  }

  double at(std::size_t r, std::size_t c) const {
    const auto cols = row_cols(r);
    const auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0.0;
    return values_[row_offsets_[r] + static_cast<std::size_t>(it - cols.begin())];
  }

  /// Dense row-major copy (tests and small problems only).
  Vector to_dense() const {
    Vector d(n_rows_ * n_cols_, 0.0);
    for (std::size_t r = 0; r < n_rows_; ++r)
      for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
        d[r * n_cols_ + col_indices_[k]] = values_[k];
    return d;
  }

  /// Subset of rows, in the given order.
  CsrMatrix select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> cols;
    Vector vals;
    for (std::size_t r : rows) {
      if (r >= n_rows_) throw DimensionError("select_rows", n_rows_, r);
      cols.insert(cols.end(), row_cols(r).begin(), row_cols(r).end());
      vals.insert(vals.end(), row_values(r).begin(), row_values(r).end());
      offsets.push_back(cols.size());
    }
    return CsrMatrix(rows.size(), n_cols_, std::move(offsets), std::move(cols), std::move(vals));
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

private:
  void validate() const {
    if (row_offsets_.size() != n_rows_ + 1)
      throw ConfigError("CSR: row_offsets must have n_rows+1 entries");
    if (row_offsets_.front() != 0) throw ConfigError("CSR: row_offsets[0] must be 0");
    if (row_offsets_.back() != values_.size())
      throw ConfigError("CSR: row_offsets[n_rows] must equal nnz");
    if (col_indices_.size() != values_.size())
      throw ConfigError("CSR: col_indices and values differ in length");
    for (std::size_t r = 0; r < n_rows_; ++r) {
      if (row_offsets_[r] > row_offsets_[r + 1])
        throw ConfigError("CSR: row_offsets must be non-decreasing");
      for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
        if (col_indices_[k] >= n_cols_) throw ConfigError("CSR: column index out of range");
        if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1])
          throw ConfigError("CSR: column indices must be strictly increasing within a row");
      }
    }
  }

  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  Vector values_;
};

// ---------------------------------------------------------------------------
// products

/// out = m * v
inline void matvec_into(const CsrMatrix& m, std::span<const double> v, std::span<double> out) {
  require_size("matvec: vector length vs matrix columns", m.n_cols(), v.size());
  require_size("matvec: output length vs matrix rows", m.n_rows(), out.size());
  for (std::size_t r = 0; r < m.n_rows(); ++r) out[r] = m.row_dot(r, v);
}

inline Vector matvec(const CsrMatrix& m, std::span<const double> v) {
  Vector out(m.n_rows());
  matvec_into(m, v, out);
  return out;
}

/// out += alpha * m^T v, without forming the transpose.
inline void matvec_transpose_add(const CsrMatrix& m, std::span<const double> v, double alpha,
                                 std::span<double> out) {
  require_size("matvec_transpose: vector length vs matrix rows", m.n_rows(), v.size());
  require_size("matvec_transpose: output length vs matrix columns", m.n_cols(), out.size());
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    const double s = alpha * v[r];
    if (s != 0.0) m.add_row_to(r, s, out);
  }
}

inline Vector matvec_transpose(const CsrMatrix& m, std::span<const double> v) {
  Vector out(m.n_cols(), 0.0);
  matvec_transpose_add(m, v, 1.0, out);
  return out;
}

inline CsrMatrix vstack(const CsrMatrix& top, const CsrMatrix& bottom) {
  if (top.n_cols() != bottom.n_cols())
    throw DimensionError("vstack: column counts differ", top.n_cols(), bottom.n_cols());
  std::vector<std::size_t> offsets(top.row_offsets());
  const std::size_t base = top.nnz();
  for (std::size_t r = 1; r < bottom.row_offsets().size(); ++r)
    offsets.push_back(base + bottom.row_offsets()[r]);
  std::vector<std::size_t> cols(top.col_indices());
  cols.insert(cols.end(), bottom.col_indices().begin(), bottom.col_indices().end());
  Vector vals(top.values());
  vals.insert(vals.end(), bottom.values().begin(), bottom.values().end());
  return CsrMatrix(top.n_rows() + bottom.n_rows(), top.n_cols(), std::move(offsets),
                   std::move(cols), std::move(vals));
}

// ---------------------------------------------------------------------------
// conjugate gradient

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Scratch vectors reused across solves.
struct CgWorkspace {
  Vector r, p, q;
  void resize(std::size_t n) {
    r.resize(n);
    p.resize(n);
    q.resize(n);
  }
};

/// Solves op(x) = b for symmetric positive definite `op`, warm-started from x.
/// Stops when ||b - op(x)|| <= tol * ||b||.
template <class Op>
CgResult conjugate_gradient(const Op& op, std::span<const double> b, std::span<double> x,
                            double tol, std::size_t max_iter, CgWorkspace& ws) {
  const std::size_t n = b.size();
  require_size("conjugate_gradient", n, x.size());
  ws.resize(n);
  auto& r = ws.r;
  auto& p = ws.p;
  auto& q = ws.q;
  op(std::span<const double>(x), std::span<double>(q));
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  const double b_norm = norm(b);
  CgResult res;
  if (b_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  double rr = norm_sq(r);
  res.relative_residual = std::sqrt(rr) / b_norm;
  if (res.relative_residual <= tol) {
    res.converged = true;
    return res;
  }
  p = r;
  while (res.iterations < max_iter) {
    ++res.iterations;
    op(std::span<const double>(p), std::span<double>(q));
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;  // lost positive definiteness
    const double alpha = rr / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    const double rr_new = norm_sq(r);
    res.relative_residual = std::sqrt(rr_new) / b_norm;
    if (res.relative_residual <= tol) {
      res.converged = true;
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return res;
}

// ---------------------------------------------------------------------------
// extremal eigenvalues of the Gram matrix m^T m

struct EigenEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline void gram_apply(const CsrMatrix& m, std::span<const double> v, Vector& tmp,
                       std::span<double> out) {
  tmp.resize(m.n_rows());
  matvec_into(m, v, tmp);
  std::fill(out.begin(), out.end(), 0.0);
  matvec_transpose_add(m, tmp, 1.0, out);
}

// Deterministic start vector. Not the all-ones vector: that one lies in the
// null space of every graph difference matrix G, which would pin power
// iteration on [G; I]^T [G; I] to the eigenvalue 1.
inline Vector start_vector(std::size_t n) {
  Vector v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = 1.0 + 0.5 * std::sin(static_cast<double>(j + 1));
  scale(1.0 / norm(v), v);
  return v;
}

} // namespace detail

/// Largest eigenvalue of m^T m (= ||m||_2^2) by power iteration.
/// Converged when the Rayleigh residual ||Gv - lambda v|| <= tol * lambda.
inline EigenEstimate gram_top_eigenvalue(const CsrMatrix& m, double tol = 1e-10,
                                         std::size_t max_iter = 10000) {
  if (m.n_cols() == 0) throw ConfigError("gram_top_eigenvalue: matrix has no columns");
  if (!(tol > 0.0)) throw ConfigError("gram_top_eigenvalue: tol must be positive");
  EigenEstimate est;
  Vector v = detail::start_vector(m.n_cols());
  Vector w(m.n_cols()), tmp;
  for (est.iterations = 1; est.iterations <= max_iter; ++est.iterations) {
    detail::gram_apply(m, v, tmp, w);
    const double lambda = dot(v, w);
    const double w_norm = norm(w);
    est.value = lambda;
    if (w_norm == 0.0) {
      est.converged = true;
      return est;
    }
    double res = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) res += (w[j] - lambda * v[j]) * (w[j] - lambda * v[j]);
    if (std::sqrt(res) <= tol * lambda) {
      est.converged = true;
      return est;
    }
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = w[j] / w_norm;
  }
  est.iterations = max_iter;
  return est;
}

/// Smallest eigenvalue of m^T m by inverse iteration (CG inner solves).
/// Returns 0 when m^T m is singular or the inner solves break down.
inline EigenEstimate gram_bottom_eigenvalue(const CsrMatrix& m, double tol = 1e-10,
                                            std::size_t max_iter = 1000) {
  if (m.n_cols() == 0) throw ConfigError("gram_bottom_eigenvalue: matrix has no columns");
  EigenEstimate est;
  if (m.n_rows() < m.n_cols() || m.nnz() == 0) {
    est.converged = true;  // rank deficient: exactly zero
    return est;
  }
  const std::size_t n = m.n_cols();
  Vector v = detail::start_vector(n);
  Vector u(n), gv(n), tmp;
  CgWorkspace ws;
  auto op = [&](std::span<const double> in, std::span<double> out) {
    detail::gram_apply(m, in, tmp, out);
  };
  for (est.iterations = 1; est.iterations <= max_iter; ++est.iterations) {
    u = v;
    const auto cg = conjugate_gradient(op, v, u, 1e-13, 20 * n + 100, ws);
    const double u_norm = norm(u);
    if (!cg.converged || !(u_norm > 0.0) || !std::isfinite(u_norm)) {
      est.value = 0.0;
      est.converged = false;
      return est;
    }
    for (std::size_t j = 0; j < n; ++j) v[j] = u[j] / u_norm;
    op(v, gv);
    const double lambda = dot(v, gv);
    est.value = lambda;
    double res = 0.0;
    for (std::size_t j = 0; j < n; ++j) res += (gv[j] - lambda * v[j]) * (gv[j] - lambda * v[j]);
    if (std::sqrt(res) <= tol * std::max(lambda, 1e-300)) {
      est.converged = true;
      return est;
    }
  }
  est.iterations = max_iter;
  return est;
}

} // namespace scas
