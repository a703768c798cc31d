#pragma once

// Dataset ingestion (LIBSVM text), train/test splits, graph-guided fused
// lasso constraints and seeded synthetic problems.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scas/error.hpp"
#include "scas/io.hpp"
#include "scas/linalg.hpp"
#include "scas/model.hpp"
#include "scas/solvers/common.hpp"

namespace scas {

// ---------------------------------------------------------------------------
// LIBSVM text format

enum class LabelMode {
  binary,  // {+1,-1}, {1,0} and {1,2} all map onto {+1,-1}
  real,    // labels kept as-is (regression targets)
};

struct ParseOptions {
  std::optional<std::size_t> feature_dim;  // default: largest index seen
  LabelMode labels = LabelMode::binary;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline double map_binary_label(double v, std::size_t line) {
  if (v == 1.0) return 1.0;
  if (v == -1.0 || v == 0.0 || v == 2.0) return -1.0;
  throw ParseError(line, "unmappable label " + format_real(v) + " (expected +1/-1, 1/0 or 1/2)");
}

} // namespace detail

inline SampleSet parse_libsvm(std::istream& in, const ParseOptions& opts = {}) {
  std::vector<Triplet> entries;
  Vector labels;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find('#') != std::string::npos)
      throw ParseError(line_no, "comments are not supported");
    std::vector<std::string_view> tokens;
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto start = rest.find_first_not_of(" \t");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      const auto end = rest.find_first_of(" \t");
      tokens.push_back(rest.substr(0, end));
      rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
    }
    if (tokens.empty()) continue;

    double label = 0.0;
    if (!detail::parse_double(tokens[0], label))
      throw ParseError(line_no, "malformed label '" + std::string(tokens[0]) + "'");
    if (opts.labels == LabelMode::binary) label = detail::map_binary_label(label, line_no);
    const std::size_t row = labels.size();
    labels.push_back(label);

    std::size_t prev = 0;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      const auto tok = tokens[k];
      const auto colon = tok.find(':');
      std::size_t index = 0;
      double value = 0.0;
      if (colon == std::string_view::npos || !detail::parse_index(tok.substr(0, colon), index) ||
          !detail::parse_double(tok.substr(colon + 1), value) || index == 0)
        throw ParseError(line_no, "malformed index:value pair '" + std::string(tok) + "'");
      if (index <= prev)
        throw ParseError(line_no, "feature indices must be strictly increasing");
      prev = index;
      max_index = std::max(max_index, index);
      entries.push_back({row, index - 1, value});
    }
  }
  std::size_t dim = max_index;
  if (opts.feature_dim) {
    if (*opts.feature_dim < max_index)
      throw ParseError(line_no, "feature index " + std::to_string(max_index) +
                                    " exceeds declared dimension " + std::to_string(*opts.feature_dim));
    dim = *opts.feature_dim;
  }
  return {CsrMatrix::from_triplets(labels.size(), dim, std::move(entries)), std::move(labels)};
}

inline void write_libsvm(std::ostream& out, const SampleSet& set,
                         LabelMode mode = LabelMode::binary) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (mode == LabelMode::binary)
      out << (set.labels[i] > 0 ? "+1" : "-1");
    else
      out << format_real(set.labels[i]);
    const auto cols = set.features.row_cols(i);
    const auto vals = set.features.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k)
      out << ' ' << cols[k] + 1 << ':' << format_real(vals[k]);
    out << '\n';
  }
}

struct Dataset {
  SampleSet samples;
  std::string name;
  std::string source_path;
};

inline Dataset load_dataset(const std::string& path, const ParseOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open data file");
  Dataset ds{parse_libsvm(in, opts), path, path};
  const auto slash = path.find_last_of('/');
  ds.name = slash == std::string::npos ? path : path.substr(slash + 1);
  if (ds.samples.size() == 0) throw IoError(path, "data file has no samples");
  if (ds.samples.dim() == 0) throw IoError(path, "data file has no features");
  return ds;
}

/// Seeded subsample of `count` rows (all rows if count >= n), original order kept.
inline Dataset subsample(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  const std::size_t n = ds.samples.size();
  if (count >= n) return ds;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return {ds.samples.subset(idx), ds.name, ds.source_path};
}

// ---------------------------------------------------------------------------
// splits

struct SplitSpec {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t repeat_index = 0;
};

struct Split {
  SampleSet train, test;
  std::vector<std::size_t> train_indices, test_indices;
};

/// Seeded permutation; the first ceil(fraction * n) samples go to training.
inline Split split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  const std::size_t n = ds.samples.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(spec.seed, spec.repeat_index, 0x5d11));
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_train = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(n))));
  Split out;
  out.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  out.train = ds.samples.subset(out.train_indices);
  out.test = ds.samples.subset(out.test_indices);
  return out;
}

// ---------------------------------------------------------------------------
// graph-guided fused lasso

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Edges (i < j) whose features have |Pearson correlation| > threshold on `train`.
/// Stands in for sparse inverse covariance selection; dense p x p work.
inline std::vector<Edge> build_correlation_graph(const SampleSet& train, double threshold) {
  const std::size_t p = train.dim(), n = train.size();
  if (threshold >= 1.0 || n == 0 || p < 2) return {};
  if (p > 16384) throw ConfigError("build_correlation_graph: too many features for a dense scan");
  const auto& a = train.features;
  Vector mean(p, 0.0), cross(p * p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto cols = a.row_cols(r);
    const auto vals = a.row_values(r);
    for (std::size_t u = 0; u < cols.size(); ++u) {
      mean[cols[u]] += vals[u];
      for (std::size_t v = u; v < cols.size(); ++v) cross[cols[u] * p + cols[v]] += vals[u] * vals[v];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& m : mean) m *= inv_n;
  auto cov = [&](std::size_t i, std::size_t j) { return cross[i * p + j] * inv_n - mean[i] * mean[j]; };
  Vector var(p);
  for (std::size_t i = 0; i < p; ++i) var[i] = cov(i, i);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < p; ++i) {
    if (!(var[i] > 0.0)) continue;
    for (std::size_t j = i + 1; j < p; ++j) {
      if (!(var[j] > 0.0)) continue;
      const double corr = cov(i, j) / std::sqrt(var[i] * var[j]);
      if (std::abs(corr) > threshold) edges.push_back({i, j});
    }
  }
  return edges;
}

/// A = [G; I] with one +1/-1 row per edge, B = -I, c = 0.
inline ConstraintSpec build_ggfl_constraint(std::size_t p, const std::vector<Edge>& edges) {
  std::vector<Triplet> t;
  t.reserve(2 * edges.size());
  for (std::size_t r = 0; r < edges.size(); ++r) {
    const auto& e = edges[r];
    if (e.i >= p || e.j >= p || e.i == e.j)
      throw ConfigError("invalid edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                        ") for p = " + std::to_string(p));
    t.push_back({r, e.i, 1.0});
    t.push_back({r, e.j, -1.0});
  }
  const auto g = CsrMatrix::from_triplets(edges.size(), p, std::move(t));
  const std::size_t l = edges.size() + p;
  return {vstack(g, CsrMatrix::identity(p)), CsrMatrix::identity(l, -1.0), Vector(l, 0.0)};
}

/// `count` distinct random edges i < j.
inline std::vector<Edge> random_edges(std::size_t p, std::size_t count, std::uint64_t seed) {
  const std::size_t max_edges = p < 2 ? 0 : p * (p - 1) / 2;
  if (count > max_edges)
    throw ConfigError("cannot draw " + std::to_string(count) + " distinct edges on " +
                      std::to_string(p) + " features");
  Rng rng(seed);
  std::set<Edge> chosen;
  std::vector<Edge> out;
  while (out.size() < count) {
    std::size_t i = draw_index(rng, p), j = draw_index(rng, p);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    if (chosen.insert({i, j}).second) out.push_back({i, j});
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic problems

struct SynthSpec {
  std::size_t p = 10;
  std::size_t n = 100;
  std::vector<Edge> edges;
  double mu = 0.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::logistic;
  double lambda = 1e-3;
  double rho = 1.0;
  double coupling = 0.8;       // feature j += coupling * feature i along each edge
  double feature_scale = 0.0;  // 0 = 1/sqrt(p)
};

struct SynthProblem {
  AdmmProblem problem;
  Vector planted_x;
};

/// Gaussian features correlated along `edges`, a sparse planted x, and labels
/// from the loss model: logistic labels are sign(a^T x + noise * Logistic(0,1)),
/// squared labels a^T x + noise * N(0,1). The optimum is not planted_x.
inline SynthProblem synth_problem(const SynthSpec& spec) {
  if (spec.p == 0 || spec.n == 0) throw ConfigError("synth_problem: p and n must be >= 1");
  for (const auto& e : spec.edges)
    if (e.i >= spec.p || e.j >= spec.p || e.i == e.j) throw ConfigError("synth_problem: invalid edge");
  const std::size_t p = spec.p, n = spec.n;
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double fs = spec.feature_scale > 0.0 ? spec.feature_scale : 1.0 / std::sqrt(double(p));

  Vector dense(n * p);
  for (double& v : dense) v = normal(rng);
  for (std::size_t r = 0; r < n; ++r) {
    double* row = dense.data() + r * p;
    for (const auto& e : spec.edges) row[e.j] += spec.coupling * row[e.i];
    for (std::size_t j = 0; j < p; ++j) row[j] *= fs;
  }

  Vector planted(p, 0.0);
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t k = std::max<std::size_t>(1, (p + 2) / 4);
  for (std::size_t s = 0; s < k; ++s) {
    const double mag = 1.0 + 2.0 * uniform(rng);
    planted[order[s]] = uniform(rng) < 0.5 ? -mag : mag;
  }

  Vector labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    double z = 0.0;
    for (std::size_t j = 0; j < p; ++j) z += dense[r * p + j] * planted[j];
    if (spec.loss == LossKind::logistic) {
      double u = uniform(rng);
      u = std::clamp(u, 1e-12, 1.0 - 1e-12);
      labels[r] = z + spec.noise * std::log(u / (1.0 - u)) >= 0.0 ? 1.0 : -1.0;
    } else {
      labels[r] = z + spec.noise * normal(rng);
    }
  }

  AdmmProblem prob;
  prob.samples = {CsrMatrix::from_dense(n, p, dense), std::move(labels)};
  prob.loss = {spec.loss, spec.mu};
  prob.l1_strength = spec.lambda;
  prob.constraint = build_ggfl_constraint(p, spec.edges);
  prob.rho = spec.rho;
  return {std::move(prob), std::move(planted)};
}

/// GGFL problem on a sample set with a given graph.
inline AdmmProblem make_ggfl_problem(SampleSet samples, const std::vector<Edge>& edges,
                                     LossSpec loss, double lambda, double rho) {
  const std::size_t p = samples.dim();
  AdmmProblem prob{std::move(samples), loss, lambda, build_ggfl_constraint(p, edges), rho};
  return prob;
}

} // namespace scas
