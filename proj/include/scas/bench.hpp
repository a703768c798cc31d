#pragma once

// Experiment orchestration: effective-pass accounting, per-pass metric
// recording, hyperparameter grid search on a small subset, reference
// solutions, memory audits and CSV / JSON output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "scas/data.hpp"
#include "scas/error.hpp"
#include "scas/io.hpp"
#include "scas/linalg.hpp"
#include "scas/model.hpp"
#include "scas/solvers/batch.hpp"
#include "scas/solvers/common.hpp"
#include "scas/solvers/scas.hpp"
#include "scas/solvers/schedule.hpp"
#include "scas/solvers/stochastic.hpp"

namespace scas {

enum class Method { batch, stoc, sa, scas, scas_strong };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::batch: return "batch";
    case Method::stoc: return "stoc";
    case Method::sa: return "sa";
    case Method::scas: return "scas";
    case Method::scas_strong: return "scas-strong";
  }
  return "?";
}

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> v{Method::batch, Method::stoc, Method::sa, Method::scas,
                                     Method::scas_strong};
  return v;
}

inline Method parse_method(const std::string& name) {
  for (Method m : all_methods())
    if (to_string(m) == name) return m;
  throw ConfigError("unknown method '" + name + "' (valid: batch, stoc, sa, scas, scas-strong)");
}

/// Effective passes: n sample visits make one pass. SCAS charges n for the
/// snapshot gradient plus M_t for the inner loop, so M_t = n gives exactly 2
/// per outer iteration. Batch counts one pass per outer iteration.
inline double effective_pass_of(Method m, const WorkCounters& c) {
  if (c.n == 0) return 0.0;
  const double n = static_cast<double>(c.n);
  switch (m) {
    case Method::batch: return static_cast<double>(c.outer_iterations);
    case Method::stoc: return static_cast<double>(c.stochastic_samples) / n;
    case Method::sa: return static_cast<double>(c.table_init_samples + c.stochastic_samples) / n;
    case Method::scas:
    case Method::scas_strong:
      return static_cast<double>(c.full_gradient_samples + c.inner_budget) / n;
  }
  return 0.0;
}

/// Sample-gradient evaluations actually performed, in passes.
inline double true_passes_of(const WorkCounters& c) {
  if (c.n == 0) return 0.0;
  return static_cast<double>(c.full_gradient_samples + c.stochastic_samples + c.table_init_samples) /
         static_cast<double>(c.n);
}

// ---------------------------------------------------------------------------
// running a single method

struct MethodParams {
  double eta = 0.1;  // step size (STOC: eta0); unused by batch
  double rho = 1.0;
  std::optional<ProjectionBall> ball;  // SCAS; default_ball() when empty
  BatchConfig batch;
};

inline AdmmProblem with_rho(AdmmProblem prob, double rho) {
  prob.rho = rho;
  return prob;
}

/// Projection ball for SCAS: centred at 0 with radius 10 ||x_sgd|| (at least 1),
/// where x_sgd is one epoch of plain SGD on the smooth loss.
inline ProjectionBall default_ball(const AdmmProblem& prob, std::uint64_t seed) {
  const std::size_t n = prob.n(), p = prob.p();
  Vector x(p, 0.0);
  const double step = 1.0 / smoothness_constant(prob);
  Rng rng(derive_seed(seed, 0xba11));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = draw_index(rng, n);
    const double d = sample_grad_coefficient(prob, i, x);
    scale(1.0 - step * prob.loss.l2_strength, x);
    prob.samples.features.add_row_to(i, -step * d, x);
  }
  return ProjectionBall::origin(p, std::max(1.0, 10.0 * norm(x)));
}

/// Outer iterations (or passes, for per-sample methods) needed to reach `passes`.
inline std::size_t iterations_for_passes(Method m, double passes) {
  const double want = std::max(passes, 1.0);
  switch (m) {
    case Method::batch:
    case Method::stoc: return static_cast<std::size_t>(std::ceil(want));
    case Method::sa: return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(want)) - 1);
    case Method::scas:
    case Method::scas_strong: return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(want / 2.0)));
  }
  return 1;
}

/// Runs `m` on `prob` (rho taken from `params`) for about `passes` effective passes.
/// SCAS variants use M = n.
inline SolveResult run_method(Method m, const AdmmProblem& base, const MethodParams& params,
                              std::uint64_t seed, double passes, const RunHooks& hooks = {}) {
  const AdmmProblem prob = with_rho(base, params.rho);
  const std::size_t T = iterations_for_passes(m, passes);
  switch (m) {
    case Method::batch: return batch_admm_solve(prob, params.batch, seed, T, hooks);
    case Method::stoc: {
      StocConfig cfg;
      cfg.eta0 = params.eta;
      return stoc_admm_solve(prob, cfg, seed, T, hooks);
    }
    case Method::sa: {
      SaConfig cfg;
      cfg.eta = params.eta;
      return sa_admm_solve(prob, cfg, seed, T, hooks);
    }
    case Method::scas: {
      Schedule sched;
      sched.mode = ScheduleMode::fixed;
      sched.eta_override = params.eta;
      sched.m_override = prob.n();
      const ProjectionBall ball = params.ball ? *params.ball : default_ball(prob, seed);
      return scas_general_solve(prob, sched, ball, seed, T, hooks);
    }
    case Method::scas_strong: {
      const StrongParams sp = strong_params_for(prob, params.eta, prob.n());
      return scas_strong_solve(prob, sp, params.ball, seed, T, hooks);
    }
  }
  throw ConfigError("run_method: unknown method");
}

// ---------------------------------------------------------------------------
// records

struct RunRecord {
  Method method = Method::scas;
  std::size_t repeat = 0;
  double effective_passes = 0.0;
  double objective = 0.0;
  double test_loss = 0.0;
  double constraint_violation = 0.0;
  double wall_seconds = 0.0;
  std::size_t stored_gradient_vectors = 0;

  bool operator==(const RunRecord&) const = default;
};

/// Equality ignoring wall-clock time.
inline bool same_results(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    RunRecord x = a[k], y = b[k];
    x.wall_seconds = y.wall_seconds = 0.0;
    if (!(x == y)) return false;
  }
  return true;
}

/// Metrics at the averaged iterate: P(x_bar, A x_bar), ||A x_bar + B y_bar - c||
/// and the unregularized test loss.
struct IterateMetrics {
  double objective = 0.0;
  double violation = 0.0;
  double test_loss = 0.0;
};

inline IterateMetrics evaluate_average(const AdmmProblem& prob, const AdmmState& st,
                                       const SampleSet* test) {
  const Vector xb = st.x_bar();
  const Vector yb = st.y_bar();
  const Vector axb = matvec(prob.constraint.A, xb);
  IterateMetrics m;
  m.objective = objective(prob, xb, axb);
  m.violation = norm(constraint_residual(prob, xb, yb));
  m.test_loss = test && test->size() > 0 ? mean_data_loss(prob.loss.kind, *test, xb)
                                         : std::numeric_limits<double>::quiet_NaN();
  return m;
}

/// Runs a method and records one row per observer call (every pass for
/// per-sample methods, every outer iteration otherwise).
inline std::vector<RunRecord> record_run(Method m, const AdmmProblem& prob, const MethodParams& params,
                                         std::uint64_t seed, double passes, std::size_t repeat,
                                         const SampleSet* test, SolveResult* result_out = nullptr) {
  const AdmmProblem run_prob = with_rho(prob, params.rho);
  std::vector<RunRecord> rows;
  const auto start = std::chrono::steady_clock::now();
  RunHooks hooks;
  hooks.observer = [&](const Progress& pr) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto met = evaluate_average(run_prob, pr.state, test);
    rows.push_back({m, repeat, effective_pass_of(m, pr.counters), met.objective, met.test_loss,
                    met.violation, secs, 0});
    return true;
  };
  SolveResult res = run_method(m, prob, params, seed, passes, hooks);
  for (auto& r : rows) r.stored_gradient_vectors = res.persistent_p_vectors;
  if (result_out) *result_out = std::move(res);
  return rows;
}

// ---------------------------------------------------------------------------
// reference solution

struct ReferenceOptions {
  double tol = 1e-10;
  std::size_t max_iters = 100000;
  std::optional<double> rho;  // default: the problem's rho
  std::optional<InitialPoint> init;
};

struct ReferenceSolution {
  Vector x, y;
  double objective = 0.0;  // P(x, A x)
  double residual = 0.0;   // ||Ax + By - c||
  double relative_change = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Batch ADMM (last iterate) until the primal residual ||Ax + By - c|| and the
/// dual residual rho ||A^T B (y_k - y_{k-1})|| are both <= tol.
inline ReferenceSolution reference_solution(const AdmmProblem& base, const ReferenceOptions& opts = {}) {
  const AdmmProblem prob = with_rho(base, opts.rho.value_or(base.rho));
  BatchConfig cfg;
  cfg.inner_tol = std::max(1e-13, opts.tol * 1e-2);
  cfg.inner_max_iters = 5000;
  cfg.init = opts.init;
  ReferenceSolution ref;
  double prev = std::numeric_limits<double>::quiet_NaN();
  double best_score = std::numeric_limits<double>::infinity();
  Vector prev_y = opts.init ? opts.init->y : Vector(prob.q(), 0.0);
  RunHooks hooks;
  hooks.observer = [&](const Progress& pr) {
    const auto& st = pr.state;
    const double obj = objective(prob, st.x, matvec(prob.constraint.A, st.x));
    const double res = norm(constraint_residual(prob, st.x, st.y));
    const Vector dy = matvec(prob.constraint.B, subtract(st.y, prev_y));
    const double dual = prob.rho * norm(matvec_transpose(prob.constraint.A, dy));
    prev_y = st.y;
    const double change = std::isnan(prev) ? std::numeric_limits<double>::infinity()
                                           : std::abs(obj - prev) / std::max(1.0, std::abs(obj));
    prev = obj;
    const double score = std::max(res, dual);
    ref.iterations = pr.iteration;
    if (score <= best_score) {
      best_score = score;
      ref.x = st.x;
      ref.y = st.y;
      ref.objective = obj;
      ref.residual = res;
      ref.relative_change = change;
    }
    if (score <= opts.tol) {
      ref.converged = true;
      return false;
    }
    return true;
  };
  batch_admm_solve(prob, cfg, 0, opts.max_iters, hooks);
  return ref;
}

// ---------------------------------------------------------------------------
// memory audit

struct AuditReport {
  Method method = Method::scas;
  std::size_t n = 0, p = 0, l = 0, q = 0;
  std::size_t persistent_p_vectors = 0;
};

/// Builds a synthetic problem of the given shape (l - p random edges, q = l)
/// and counts the persistent p-vectors a short run holds.
inline AuditReport memory_audit(Method m, std::size_t n, std::size_t p, std::size_t l, std::size_t q) {
  if (l < p) throw ConfigError("memory_audit: l must be >= p (A = [G; I])");
  if (q != l) throw ConfigError("memory_audit: q must equal l (B = -I)");
  SynthSpec spec;
  spec.p = p;
  spec.n = n;
  spec.edges = random_edges(p, l - p, 7);
  spec.mu = m == Method::scas_strong ? 0.1 : 0.0;
  spec.seed = 11;
  const auto synth = synth_problem(spec);
  MethodParams params;
  params.eta = 1e-3;
  params.rho = 0.1;
  params.batch.inner_max_iters = 5;
  const auto res = run_method(m, synth.problem, params, 1, 1.0);
  return {m, n, p, l, q, res.persistent_p_vectors};
}

// ---------------------------------------------------------------------------
// experiments

/// k log-spaced values from lo to hi inclusive.
inline std::vector<double> logspace(double lo, double hi, std::size_t k) {
  if (k == 1) return {lo};
  std::vector<double> v(k);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < k; ++i)
    v[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(k - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

struct ExperimentPlan {
  Dataset dataset;
  std::vector<Method> methods{Method::batch, Method::stoc, Method::sa, Method::scas};
  std::size_t repeats = 10;
  double passes = 10.0;
  double lambda = 1e-5;
  double mu = 0.0;              // extra L2 strength (required > 0 for scas-strong)
  LossKind loss = LossKind::logistic;
  double tau = 0.5;             // correlation-graph threshold
  double train_fraction = 0.5;
  std::vector<double> eta_grid = logspace(1e-4, 1.0, 7);
  std::vector<double> rho_grid = logspace(1e-3, 10.0, 5);
  std::size_t grid_subset_size = 500;
  double grid_passes_stochastic = 5.0;
  double grid_passes_batch = 100.0;
  std::map<Method, MethodParams> fixed_params;  // methods listed here skip the grid search
  std::optional<std::vector<Edge>> edges;       // default: correlation graph on each train split
  bool compute_reference = true;
  std::size_t reference_max_iters = 100000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: SCAS_THREADS, else hardware concurrency

  void validate() const {
    if (methods.empty()) throw ConfigError("plan: methods list is empty");
    if (repeats == 0) throw ConfigError("plan: repeats must be >= 1");
    if (!(passes > 0.0)) throw ConfigError("plan: passes must be > 0");
    if (!(lambda >= 0.0)) throw ConfigError("plan: lambda must be >= 0");
    if (!(mu >= 0.0)) throw ConfigError("plan: mu must be >= 0");
    if (eta_grid.empty() || rho_grid.empty()) throw ConfigError("plan: grids must be nonempty");
    for (double v : eta_grid)
      if (!(v > 0.0)) throw ConfigError("plan: eta grid values must be > 0");
    for (double v : rho_grid)
      if (!(v > 0.0)) throw ConfigError("plan: rho grid values must be > 0");
    if (grid_subset_size == 0) throw ConfigError("plan: grid_subset_size must be >= 1");
    if (!(grid_passes_stochastic > 0.0) || !(grid_passes_batch > 0.0))
      throw ConfigError("plan: grid pass budgets must be > 0");
    for (Method m : methods)
      if (m == Method::scas_strong && !(mu > 0.0))
        throw ConfigError("plan: scas-strong needs mu > 0");
  }
};

struct GridChoice {
  Method method = Method::scas;
  double eta = 0.0, rho = 0.0;
  double subset_objective = 0.0;
  bool from_grid = true;
};

struct RunFailure {
  Method method = Method::scas;
  std::size_t repeat = 0;
  std::string message;
};

struct RepeatInfo {
  std::size_t repeat = 0;
  std::size_t n_train = 0, n_test = 0, edges = 0;
  std::vector<std::size_t> grid_subset;  // indices into the training split
  std::vector<GridChoice> choices;
  std::map<Method, double> sample_visit_passes;  // all gradient evaluations, in passes
  std::optional<double> reference_objective;
  bool reference_converged = false;
};

struct ExperimentResult {
  std::vector<RunRecord> records;  // sorted by (method, repeat, passes)
  std::vector<RunRecord> mean;     // averaged over repeats; `repeat` holds the count averaged
  std::vector<RepeatInfo> repeats;
  std::vector<RunFailure> failures;
  std::vector<std::string> warnings;
};

inline std::size_t thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SCAS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void sort_records(std::vector<RunRecord>& recs) {
  std::stable_sort(recs.begin(), recs.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.method, a.repeat, a.effective_passes) <
           std::tie(b.method, b.repeat, b.effective_passes);
  });
}

/// Averages rows that share (method, position within the run) across repeats.
inline std::vector<RunRecord> mean_over_repeats(const std::vector<RunRecord>& records) {
  std::map<std::pair<Method, std::size_t>, std::vector<const RunRecord*>> groups;
  std::map<std::pair<Method, std::size_t>, std::size_t> position;
  for (const auto& r : records) groups[{r.method, position[{r.method, r.repeat}]++}].push_back(&r);
  std::vector<RunRecord> out;
  for (const auto& [key, rows] : groups) {
    RunRecord m;
    m.method = key.first;
    m.repeat = rows.size();
    const double k = static_cast<double>(rows.size());
    double stored = 0.0;
    for (const RunRecord* r : rows) {
      m.effective_passes += r->effective_passes;
      m.objective += r->objective;
      m.test_loss += r->test_loss;
      m.constraint_violation += r->constraint_violation;
      m.wall_seconds += r->wall_seconds;
      stored += static_cast<double>(r->stored_gradient_vectors);
    }
    m.effective_passes /= k;
    m.objective /= k;
    m.test_loss /= k;
    m.constraint_violation /= k;
    m.wall_seconds /= k;
    m.stored_gradient_vectors = static_cast<std::size_t>(std::llround(stored / k));
    out.push_back(m);
  }
  sort_records(out);
  return out;
}

namespace detail {

inline GridChoice grid_search(Method m, const AdmmProblem& subset_prob, const ExperimentPlan& plan,
                              std::uint64_t seed) {
  const bool batch = m == Method::batch;
  const double passes = batch ? plan.grid_passes_batch : plan.grid_passes_stochastic;
  const std::vector<double> etas = batch ? std::vector<double>{0.0} : plan.eta_grid;
  std::optional<GridChoice> best;
  for (double rho : plan.rho_grid) {
    for (double eta : etas) {
      MethodParams params;
      params.eta = eta;
      params.rho = rho;
      double obj = std::numeric_limits<double>::infinity();
      try {
        const auto res = run_method(m, subset_prob, params, seed, passes);
        obj = objective(subset_prob, res.x_bar, res.y_of_x_bar);
      } catch (const SolverAbort&) {
        continue;
      } catch (const ConfigError&) {
        continue;  // e.g. eta outside the strongly convex variant's range
      }
      if (!std::isfinite(obj)) continue;
      if (!best || obj < best->subset_objective) best = GridChoice{m, eta, rho, obj, true};
    }
  }
  if (!best) throw SolverAbort(0, std::numeric_limits<double>::quiet_NaN(),
                               "grid search: every candidate diverged for " + to_string(m));
  return *best;
}

struct RepeatOutput {
  std::vector<RunRecord> records;
  RepeatInfo info;
  std::vector<RunFailure> failures;
};

inline RepeatOutput run_repeat(const ExperimentPlan& plan, std::size_t rep) {
  RepeatOutput out;
  out.info.repeat = rep;
  const Split sp = split(plan.dataset, {plan.train_fraction, plan.seed, rep});
  out.info.n_train = sp.train.size();
  out.info.n_test = sp.test.size();
  const auto edges = plan.edges ? *plan.edges : build_correlation_graph(sp.train, plan.tau);
  out.info.edges = edges.size();
  const AdmmProblem prob =
      make_ggfl_problem(sp.train, edges, {plan.loss, plan.mu}, plan.lambda, 1.0);

  // one shared grid subset per repeat
  std::vector<std::size_t> perm(sp.train.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(plan.seed, rep, 0x9a1d));
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(std::min(plan.grid_subset_size, perm.size()));
  std::sort(perm.begin(), perm.end());
  out.info.grid_subset = perm;
  const AdmmProblem subset_prob =
      make_ggfl_problem(sp.train.subset(perm), edges, {plan.loss, plan.mu}, plan.lambda, 1.0);

  for (Method m : plan.methods) {
    const std::uint64_t run_seed = derive_seed(plan.seed, rep, 1 + static_cast<std::uint64_t>(m));
    try {
      MethodParams params;
      if (auto it = plan.fixed_params.find(m); it != plan.fixed_params.end()) {
        params = it->second;
        out.info.choices.push_back({m, params.eta, params.rho, std::numeric_limits<double>::quiet_NaN(), false});
      } else {
        const GridChoice choice = grid_search(m, subset_prob, plan, run_seed);
        params.eta = choice.eta;
        params.rho = choice.rho;
        out.info.choices.push_back(choice);
      }
      SolveResult res;
      auto rows = record_run(m, prob, params, run_seed, plan.passes, rep, &sp.test, &res);
      out.info.sample_visit_passes[m] = true_passes_of(res.counters);
      out.records.insert(out.records.end(), rows.begin(), rows.end());
    } catch (const Error& e) {
      out.failures.push_back({m, rep, e.what()});
    }
  }

  if (plan.compute_reference) {
    ReferenceOptions ro;
    ro.max_iters = plan.reference_max_iters;
    const auto ref = reference_solution(prob, ro);
    out.info.reference_objective = ref.objective;
    out.info.reference_converged = ref.converged;
  }
  return out;
}

} // namespace detail

/// Runs every (repeat, method) of the plan. Repeats run concurrently; the
/// merged table does not depend on the thread count.
inline ExperimentResult run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  std::vector<detail::RepeatOutput> outs(plan.repeats);
  std::vector<std::string> errors(plan.repeats);
  const std::size_t workers = std::min(thread_count(plan.threads), plan.repeats);
  std::size_t next = 0;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      std::size_t rep;
      {
        std::lock_guard lock(mu);
        if (next >= plan.repeats) return;
        rep = next++;
      }
      try {
        outs[rep] = detail::run_repeat(plan, rep);
      } catch (const std::exception& e) {
        errors[rep] = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw ConfigError(e);

  ExperimentResult res;
  for (auto& o : outs) {
    res.records.insert(res.records.end(), o.records.begin(), o.records.end());
    res.failures.insert(res.failures.end(), o.failures.begin(), o.failures.end());
    res.repeats.push_back(std::move(o.info));
  }
  sort_records(res.records);
  res.mean = mean_over_repeats(res.records);
  return res;
}

// ---------------------------------------------------------------------------
// CSV and JSON output

inline constexpr const char* kCsvHeader =
    "method,repeat,effective_passes,objective,test_loss,constraint_violation,wall_seconds,"
    "stored_gradient_vectors";

inline std::string to_csv(std::vector<RunRecord> records) {
  sort_records(records);
  std::string s = kCsvHeader;
  s += '\n';
  for (const auto& r : records) {
    s += to_string(r.method) + ',' + std::to_string(r.repeat) + ',' + format_real(r.effective_passes) +
         ',' + format_real(r.objective) + ',' + format_real(r.test_loss) + ',' +
         format_real(r.constraint_violation) + ',' + format_real(r.wall_seconds) + ',' +
         std::to_string(r.stored_gradient_vectors) + '\n';
  }
  return s;
}

inline void write_csv(const std::vector<RunRecord>& records, const std::string& path) {
  write_file_atomic(path, to_csv(records));
}

inline std::vector<RunRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open CSV file");
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ParseError(1, path + ": unexpected CSV header");
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  auto real = [&](const std::string& f) {
    char* end = nullptr;
    const double v = std::strtod(f.c_str(), &end);
    if (f.empty() || *end != '\0') throw ParseError(line_no, path + ": bad number '" + f + "'");
    return v;
  };
  auto count = [&](const std::string& f) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(f.c_str(), &end, 10);
    if (f.empty() || *end != '\0') throw ParseError(line_no, path + ": bad count '" + f + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ParseError(line_no, path + ": expected 8 fields");
    RunRecord r;
    try {
      r.method = parse_method(f[0]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    r.repeat = count(f[1]);
    r.effective_passes = real(f[2]);
    r.objective = real(f[3]);
    r.test_loss = real(f[4]);
    r.constraint_violation = real(f[5]);
    r.wall_seconds = real(f[6]);
    r.stored_gradient_vectors = count(f[7]);
    out.push_back(r);
  }
  return out;
}

inline nlohmann::json plan_to_json(const ExperimentPlan& plan) {
  nlohmann::json j;
  j["dataset"] = {{"name", plan.dataset.name},
                  {"path", plan.dataset.source_path},
                  {"n", plan.dataset.samples.size()},
                  {"p", plan.dataset.samples.dim()}};
  std::vector<std::string> methods;
  for (Method m : plan.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["repeats"] = plan.repeats;
  j["passes"] = plan.passes;
  j["lambda"] = plan.lambda;
  j["mu"] = plan.mu;
  j["loss"] = to_string(plan.loss);
  j["tau"] = plan.tau;
  j["train_fraction"] = plan.train_fraction;
  j["eta_grid"] = plan.eta_grid;
  j["rho_grid"] = plan.rho_grid;
  j["grid_subset_size"] = plan.grid_subset_size;
  j["grid_passes_stochastic"] = plan.grid_passes_stochastic;
  j["grid_passes_batch"] = plan.grid_passes_batch;
  j["seed"] = plan.seed;
  return j;
}

inline nlohmann::json summary_json(const ExperimentPlan& plan, const ExperimentResult& res) {
  nlohmann::json j;
  j["plan"] = plan_to_json(plan);
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : res.repeats) {
    nlohmann::json rj;
    rj["repeat"] = r.repeat;
    rj["n_train"] = r.n_train;
    rj["n_test"] = r.n_test;
    rj["edges"] = r.edges;
    rj["grid_subset"] = r.grid_subset;
    nlohmann::json choices = nlohmann::json::array();
    for (const auto& c : r.choices) {
      nlohmann::json cj{{"method", to_string(c.method)}, {"eta", c.eta}, {"rho", c.rho},
                        {"from_grid", c.from_grid}};
      if (std::isfinite(c.subset_objective)) cj["subset_objective"] = c.subset_objective;
      choices.push_back(cj);
    }
    rj["hyperparameters"] = choices;
    nlohmann::json visits;
    for (const auto& [m, v] : r.sample_visit_passes) visits[to_string(m)] = v;
    rj["sample_visit_passes"] = visits;
    if (r.reference_objective) {
      rj["reference_objective"] = *r.reference_objective;
      rj["reference_converged"] = r.reference_converged;
    }
    reps.push_back(rj);
  }
  j["repeats"] = reps;
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& f : res.failures)
    fails.push_back({{"method", to_string(f.method)}, {"repeat", f.repeat}, {"message", f.message}});
  j["failures"] = fails;
  j["warnings"] = res.warnings;
  return j;
}

inline void write_summary_json(const ExperimentPlan& plan, const ExperimentResult& res,
                               const std::string& path) {
  write_file_atomic(path, summary_json(plan, res).dump(2) + "\n");
}

} // namespace scas
