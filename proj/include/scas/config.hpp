#pragma once

// Flat `key = value` configuration with a typed schema. Values come from
// three layers; later layers win: defaults, then a config file, then flags.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scas/bench.hpp"
#include "scas/error.hpp"

namespace scas {

enum class ValueType { integer, real, text, boolean, real_list, text_list };

enum class ValueSource { defaulted, file, flag };

inline std::string to_string(ValueSource s) {
  switch (s) {
    case ValueSource::defaulted: return "default";
    case ValueSource::file: return "file";
    case ValueSource::flag: return "flag";
  }
  return "?";
}

struct KeySpec {
  std::string key;
  ValueType type = ValueType::text;
  std::string default_value;  // empty = unset
  std::optional<double> min, max;  // numeric range, inclusive; lists check each element
  std::vector<std::string> choices;  // allowed text values (each element for lists)
  std::string help;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::optional<double> to_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> to_integer(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  return std::nullopt;
}

} // namespace detail

class ConfigSchema {
public:
  ConfigSchema& add(KeySpec spec) {
    keys_[spec.key] = std::move(spec);
    return *this;
  }

  const KeySpec* find(const std::string& key) const {
    const auto it = keys_.find(key);
    return it == keys_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, KeySpec>& keys() const noexcept { return keys_; }

  /// Throws ConfigError unless `value` is valid for `key`.
  void check(const std::string& key, const std::string& value) const {
    const KeySpec* spec = find(key);
    if (!spec) throw ConfigError("unknown configuration key '" + key + "'");
    auto fail = [&](const std::string& why) {
      throw ConfigError("invalid value '" + value + "' for '" + key + "': " + why);
    };
    auto check_range = [&](double v) {
      if (spec->min && v < *spec->min) fail("must be >= " + format_real(*spec->min));
      if (spec->max && v > *spec->max) fail("must be <= " + format_real(*spec->max));
    };
    auto check_choice = [&](const std::string& v) {
      if (!spec->choices.empty() &&
          std::find(spec->choices.begin(), spec->choices.end(), v) == spec->choices.end()) {
        std::string list;
        for (const auto& c : spec->choices) list += (list.empty() ? "" : ", ") + c;
        fail("expected one of: " + list);
      }
    };
    switch (spec->type) {
      case ValueType::integer: {
        const auto v = detail::to_integer(value);
        if (!v) fail("expected an integer");
        check_range(static_cast<double>(*v));
        break;
      }
      case ValueType::real: {
        const auto v = detail::to_real(value);
        if (!v) fail("expected a finite number");
        check_range(*v);
        break;
      }
      case ValueType::boolean:
        if (!detail::to_bool(value)) fail("expected true or false");
        break;
      case ValueType::text: check_choice(value); break;
      case ValueType::real_list: {
        const auto items = detail::split_list(value);
        if (items.empty()) fail("expected a nonempty comma-separated list");
        for (const auto& item : items) {
          const auto v = detail::to_real(item);
          if (!v) fail("list element '" + item + "' is not a finite number");
          check_range(*v);
        }
        break;
      }
      case ValueType::text_list: {
        const auto items = detail::split_list(value);
        if (items.empty()) fail("expected a nonempty comma-separated list");
        for (const auto& item : items) check_choice(item);
        break;
      }
    }
  }

private:
  std::map<std::string, KeySpec> keys_;
};

class Config {
public:
  explicit Config(ConfigSchema schema) : schema_(std::move(schema)) {
    for (const auto& [key, spec] : schema_.keys())
      if (!spec.default_value.empty()) values_[key] = {spec.default_value, ValueSource::defaulted};
  }

  /// Sets a value; a layer never overrides a value from a higher-precedence layer.
  void set(const std::string& key, const std::string& value, ValueSource source) {
    schema_.check(key, value);
    const auto it = values_.find(key);
    if (it != values_.end() && it->second.source > source) return;
    values_[key] = {value, source};
  }

  /// Reads `key = value` lines; '#' starts a comment, blank lines are skipped.
  void load(std::istream& in, const std::string& origin) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string body = detail::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
      const std::string key = detail::trim(body.substr(0, eq));
      const std::string value = detail::trim(body.substr(eq + 1));
      try {
        set(key, value, ValueSource::file);
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    load(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  ValueSource source_of(const std::string& key) const { return entry(key).source; }

  const std::string& text(const std::string& key) const { return entry(key).value; }

  std::optional<std::string> text_opt(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return text(key);
  }

  double real(const std::string& key) const { return *detail::to_real(text(key)); }

  long long integer(const std::string& key) const { return *detail::to_integer(text(key)); }

  std::size_t count(const std::string& key) const { return static_cast<std::size_t>(integer(key)); }

  bool boolean(const std::string& key) const { return *detail::to_bool(text(key)); }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : detail::split_list(text(key))) out.push_back(*detail::to_real(item));
    return out;
  }

  std::vector<std::string> texts(const std::string& key) const { return detail::split_list(text(key)); }

  const ConfigSchema& schema() const noexcept { return schema_; }

private:
  struct Entry {
    std::string value;
    ValueSource source = ValueSource::defaulted;
  };

  const Entry& entry(const std::string& key) const {
    if (!schema_.find(key)) throw ConfigError("unknown configuration key '" + key + "'");
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("configuration key '" + key + "' is not set");
    return it->second;
  }

  ConfigSchema schema_;
  std::map<std::string, Entry> values_;
};

/// Every key understood by the command-line tool.
inline ConfigSchema experiment_schema() {
  const std::vector<std::string> method_names{"batch", "stoc", "sa", "scas", "scas-strong"};
  ConfigSchema s;
  s.add({"data", ValueType::text, "", {}, {}, {}, "LIBSVM data file"});
  s.add({"method", ValueType::text, "scas", {}, {}, method_names, "method for fit"});
  s.add({"methods", ValueType::text_list, "batch,stoc,sa,scas", {}, {}, method_names,
         "methods for benchmark"});
  s.add({"loss", ValueType::text, "logistic", {}, {}, {"logistic", "squared"}, "smooth loss"});
  s.add({"lambda", ValueType::real, "1e-5", 0.0, {}, {}, "L1 strength on A x"});
  s.add({"mu", ValueType::real, "0", 0.0, {}, {}, "extra L2 strength"});
  s.add({"tau", ValueType::real, "0.5", 0.0, 1.0, {}, "correlation threshold for the feature graph"});
  s.add({"train_fraction", ValueType::real, "0.5", 1e-9, 1.0 - 1e-9, {}, "training share of each split"});
  s.add({"repeats", ValueType::integer, "10", 1.0, {}, {}, "random splits"});
  s.add({"passes", ValueType::real, "10", 1e-9, {}, {}, "effective-pass budget"});
  s.add({"seed", ValueType::integer, "0", 0.0, {}, {}, "base random seed"});
  auto joined = [](const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : ",") + format_real(x);
    return out;
  };
  s.add({"eta_grid", ValueType::real_list, joined(logspace(1e-4, 1.0, 7)), 1e-300, {}, {},
         "step-size candidates"});
  s.add({"rho_grid", ValueType::real_list, joined(logspace(1e-3, 10.0, 5)), 1e-300, {}, {}, "penalty candidates"});
  s.add({"grid_subset_size", ValueType::integer, "500", 1.0, {}, {}, "samples used for tuning"});
  s.add({"grid_passes_stochastic", ValueType::real, "5", 1e-9, {}, {}, "tuning budget, stochastic methods"});
  s.add({"grid_passes_batch", ValueType::real, "100", 1e-9, {}, {}, "tuning budget, batch ADMM"});
  s.add({"eta", ValueType::real, "", 1e-300, {}, {}, "fixed step size (skips tuning when set with rho)"});
  s.add({"rho", ValueType::real, "", 1e-300, {}, {}, "fixed penalty (skips tuning when set with eta)"});
  s.add({"strong", ValueType::boolean, "false", {}, {}, {}, "use the strongly convex SCAS variant"});
  s.add({"reference", ValueType::boolean, "true", {}, {}, {}, "compute the reference optimum"});
  s.add({"reference_max_iters", ValueType::integer, "100000", 1.0, {}, {}, "reference solver cap"});
  s.add({"threads", ValueType::integer, "0", 0.0, {}, {}, "worker threads (0 = SCAS_THREADS or all cores)"});
  s.add({"edges_file", ValueType::text, "", {}, {}, {},
         "JSON file with an \"edges\" list of [i, j] pairs (replaces the correlation graph)"});
  s.add({"out", ValueType::text, "", {}, {}, {}, "CSV output path for fit"});
  s.add({"out_dir", ValueType::text, "results", {}, {}, {}, "output directory for benchmark"});
  return s;
}

/// Reads the "edges" array of [i, j] pairs from a JSON file (as written next to
/// synthetic datasets).
inline std::vector<Edge> load_edges_json(const std::string& path, std::size_t p) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open edge file");
  std::vector<Edge> edges;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::string("bad edge file: ") + e.what());
  }
  for (const auto& e : edges)
    if (e.i >= p || e.j >= p || e.i == e.j)
      throw ConfigError(path + ": edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                        ") does not fit " + std::to_string(p) + " features");
  return edges;
}

/// ExperimentPlan from a validated configuration and a loaded dataset.
inline ExperimentPlan plan_from_config(const Config& cfg, Dataset dataset) {
  ExperimentPlan plan;
  plan.dataset = std::move(dataset);
  plan.methods.clear();
  for (const auto& name : cfg.texts("methods")) {
    Method m = parse_method(name);
    if (m == Method::scas && cfg.boolean("strong")) m = Method::scas_strong;
    plan.methods.push_back(m);
  }
  plan.loss = cfg.text("loss") == "squared" ? LossKind::squared : LossKind::logistic;
  plan.lambda = cfg.real("lambda");
  plan.mu = cfg.real("mu");
  plan.tau = cfg.real("tau");
  plan.train_fraction = cfg.real("train_fraction");
  plan.repeats = cfg.count("repeats");
  plan.passes = cfg.real("passes");
  plan.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  plan.eta_grid = cfg.reals("eta_grid");
  plan.rho_grid = cfg.reals("rho_grid");
  plan.grid_subset_size = cfg.count("grid_subset_size");
  plan.grid_passes_stochastic = cfg.real("grid_passes_stochastic");
  plan.grid_passes_batch = cfg.real("grid_passes_batch");
  plan.compute_reference = cfg.boolean("reference");
  plan.reference_max_iters = cfg.count("reference_max_iters");
  plan.threads = cfg.count("threads");
  if (cfg.has("edges_file")) plan.edges = load_edges_json(cfg.text("edges_file"), plan.dataset.samples.dim());
  if (cfg.has("eta") && cfg.has("rho")) {
    MethodParams fixed;
    fixed.eta = cfg.real("eta");
    fixed.rho = cfg.real("rho");
    for (Method m : plan.methods) plan.fixed_params[m] = fixed;
  } else if (cfg.has("eta") || cfg.has("rho")) {
    throw ConfigError("eta and rho must be given together to skip tuning");
  }
  plan.validate();
  return plan;
}

} // namespace scas
