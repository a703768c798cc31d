// scas_cli: fit, benchmark and synth subcommands.
//
// Every flag maps onto a key of the experiment schema (dashes become
// underscores). Values given on the command line beat values from --config,
// which beat the schema defaults. Exit codes: 0 success, 2 configuration /
// input errors, 3 solver aborts.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "scas/scas.hpp"

namespace fs = std::filesystem;
using namespace scas;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

/// Flag values collected by CLI11 as raw text; validation happens in the schema.
struct FlagSet {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::string config_path;

  void option(CLI::App* app, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_option(flag, values[key], help);
  }

  void toggle(CLI::App* app, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app->add_flag(flag, switches[key], help);
  }

  Config resolve(CLI::App* app) const {
    Config cfg(experiment_schema());
    for (const auto& [key, value] : values) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (app->count(flag) > 0) cfg.set(key, value, ValueSource::flag);
    }
    for (const auto& [key, on] : switches)
      if (on) cfg.set(key, "true", ValueSource::flag);
    if (!config_path.empty()) cfg.load_file(config_path);
    return cfg;
  }
};

void add_experiment_flags(CLI::App* app, FlagSet& flags) {
  app->add_option("--config", flags.config_path, "key = value configuration file");
  flags.option(app, "data", "LIBSVM data file");
  flags.option(app, "loss", "logistic or squared");
  flags.option(app, "lambda", "L1 strength on the graph-guided penalty");
  flags.option(app, "mu", "extra L2 strength");
  flags.option(app, "tau", "correlation threshold for the feature graph");
  flags.option(app, "edges_file", "JSON edge list to use instead of the correlation graph");
  flags.option(app, "train_fraction", "training share of each split");
  flags.option(app, "passes", "effective-pass budget");
  flags.option(app, "seed", "base random seed");
  flags.option(app, "eta", "fixed step size (with --rho, skips tuning)");
  flags.option(app, "rho", "fixed penalty (with --eta, skips tuning)");
  flags.option(app, "eta_grid", "step-size candidates, comma separated");
  flags.option(app, "rho_grid", "penalty candidates, comma separated");
  flags.option(app, "grid_subset_size", "samples used for tuning");
  flags.option(app, "grid_passes_stochastic", "tuning budget for stochastic methods");
  flags.option(app, "grid_passes_batch", "tuning budget for batch ADMM");
  flags.option(app, "reference", "compute the reference optimum (true/false)");
  flags.option(app, "reference_max_iters", "iteration cap of the reference solver");
  flags.option(app, "threads", "worker threads (0 = SCAS_THREADS or all cores)");
  flags.toggle(app, "strong", "use the strongly convex SCAS variant");
}

Dataset load_for(const Config& cfg) {
  if (!cfg.has("data")) throw ConfigError("no data file given (use --data or 'data =' in the config)");
  const std::string path = cfg.text("data");
  ParseOptions opts;
  if (cfg.text("loss") == "squared") opts.labels = LabelMode::real;
  try {
    return load_dataset(path, opts);
  } catch (const ParseError& e) {
    throw IoError(path, e.what());
  }
}

void report_failures(const ExperimentResult& res) {
  for (const auto& f : res.failures)
    std::cerr << "error: " << to_string(f.method) << " repeat " << f.repeat << ": " << f.message << "\n";
}

void print_mean(const std::vector<RunRecord>& mean) {
  for (const auto& r : mean)
    std::cerr << to_string(r.method) << " pass " << format_real(r.effective_passes)
              << "  objective " << format_real(r.objective) << "  test_loss "
              << format_real(r.test_loss) << "  violation " << format_real(r.constraint_violation)
              << "\n";
}

std::string sidecar(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  p.replace_extension(suffix);
  return p.string();
}

int cmd_fit(const Config& cfg) {
  auto ds = load_for(cfg);
  std::cerr << "loaded " << ds.source_path << ": n = " << ds.samples.size() << ", p = " << ds.samples.dim()
            << "\n";
  Config local = cfg;
  local.set("methods", cfg.text("method"), ValueSource::flag);
  local.set("repeats", "1", ValueSource::flag);
  const ExperimentPlan plan = plan_from_config(local, std::move(ds));
  std::cerr << "fitting " << to_string(plan.methods[0]) << " with lambda = " << format_real(plan.lambda)
            << "\n";
  const auto res = run_experiment(plan);
  const std::string out = cfg.text_opt("out").value_or("fit.csv");
  write_csv(res.records, out);
  write_summary_json(plan, res, sidecar(out, ".json"));
  print_mean(res.mean);
  std::cerr << "wrote " << out << "\n";
  if (!res.failures.empty()) {
    report_failures(res);
    return kExitAbort;
  }
  return 0;
}

int cmd_benchmark(const Config& cfg) {
  auto ds = load_for(cfg);
  std::cerr << "loaded " << ds.source_path << ": n = " << ds.samples.size() << ", p = " << ds.samples.dim()
            << "\n";
  const ExperimentPlan plan = plan_from_config(cfg, std::move(ds));
  std::cerr << "running " << plan.repeats << " repeats of " << plan.methods.size() << " methods, "
            << format_real(plan.passes) << " passes, " << thread_count(plan.threads) << " threads\n";
  const auto res = run_experiment(plan);
  const fs::path dir = cfg.text("out_dir");
  for (Method m : plan.methods) {
    std::vector<RunRecord> rows;
    for (const auto& r : res.records)
      if (r.method == m) rows.push_back(r);
    write_csv(rows, (dir / (to_string(m) + ".csv")).string());
  }
  write_csv(res.mean, (dir / "mean.csv").string());
  write_summary_json(plan, res, (dir / "summary.json").string());
  print_mean(res.mean);
  std::cerr << "wrote " << dir.string() << "\n";
  if (!res.failures.empty()) {
    report_failures(res);
    return kExitAbort;
  }
  return 0;
}

struct SynthArgs {
  long long p = 10, n = 100, edges = 5, seed = 0;
  double noise = 1.0;
  std::string loss = "logistic";
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  if (a.p < 1 || a.n < 1 || a.edges < 0 || a.seed < 0) throw ConfigError("synth: p, n >= 1 and edges, seed >= 0");
  if (!(a.noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
  if (a.loss != "logistic" && a.loss != "squared") throw ConfigError("synth: loss must be logistic or squared");
  SynthSpec spec;
  spec.p = static_cast<std::size_t>(a.p);
  spec.n = static_cast<std::size_t>(a.n);
  spec.seed = static_cast<std::uint64_t>(a.seed);
  spec.edges = random_edges(spec.p, static_cast<std::size_t>(a.edges), derive_seed(spec.seed, 0xed9e));
  spec.noise = a.noise;
  spec.loss = a.loss == "squared" ? LossKind::squared : LossKind::logistic;
  const auto sp = synth_problem(spec);

  std::ostringstream data;
  write_libsvm(data, sp.problem.samples, spec.loss == LossKind::squared ? LabelMode::real : LabelMode::binary);
  write_file_atomic(a.out, data.str());

  nlohmann::json j;
  j["n"] = spec.n;
  j["p"] = spec.p;
  j["seed"] = spec.seed;
  j["loss"] = a.loss;
  j["noise"] = spec.noise;
  j["planted_x"] = sp.planted_x;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : spec.edges) edges.push_back({e.i, e.j});
  j["edges"] = edges;
  write_file_atomic(sidecar(a.out, ".json"), j.dump(2) + "\n");
  std::cerr << "wrote " << a.out << " (" << spec.n << " samples, " << spec.p << " features, "
            << spec.edges.size() << " edges)\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic ADMM solvers for graph-guided fused lasso"};
  app.require_subcommand(1);

  FlagSet fit_flags, bench_flags;
  auto* fit = app.add_subcommand("fit", "run one method on one train/test split");
  add_experiment_flags(fit, fit_flags);
  fit_flags.option(fit, "method", "batch, stoc, sa, scas or scas-strong");
  fit_flags.option(fit, "out", "CSV output path (JSON summary written next to it)");

  auto* bench = app.add_subcommand("benchmark", "compare methods over repeated random splits");
  add_experiment_flags(bench, bench_flags);
  bench_flags.option(bench, "methods", "comma-separated method list");
  bench_flags.option(bench, "repeats", "number of random splits");
  bench_flags.option(bench, "out_dir", "output directory");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "write a synthetic graph-structured dataset");
  synth->add_option("--p", synth_args.p, "features");
  synth->add_option("--n", synth_args.n, "samples");
  synth->add_option("--edges", synth_args.edges, "random feature-graph edges");
  synth->add_option("--seed", synth_args.seed, "random seed");
  synth->add_option("--noise", synth_args.noise, "label noise scale");
  synth->add_option("--loss", synth_args.loss, "logistic or squared");
  synth->add_option("--out", synth_args.out, "LIBSVM output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*fit) return cmd_fit(fit_flags.resolve(fit));
    if (*bench) return cmd_benchmark(bench_flags.resolve(bench));
    if (*synth) return cmd_synth(synth_args);
  } catch (const SolverAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAbort;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
