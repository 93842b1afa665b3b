#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "estimators.hpp"
#include "generator.hpp"
#include "gibbs.hpp"
#include "mobility.hpp"
#include "spectral.hpp"

namespace kls {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration files
//
//   # comment
//   [run]
//   kind = qv            one of list_experiments()
//   seed = 7
//   repeats = 1          independent replicates per grid point (seed + r)
//   out = results.jsonl
//   target = bad-set     sweep only: the experiment being swept
//   axis = ell           sweep only: the grid axis of the fit
//   [grid]
//   n = 64, 128, 256     comma lists, integer ranges a..b, or 2^a..2^b
//   [samples]
//   M = 64
//   [tolerance]
//   value = 0.1

struct ExperimentConfig {
  std::string kind;
  std::string target;
  std::string axis;
  std::uint64_t seed = 1;
  std::int64_t repeats = 1;
  std::string out;
  std::map<std::string, std::vector<double>> grid;
  std::map<std::string, double> samples;
  std::optional<double> tolerance;

  // The experiment whose evaluator runs at each grid point.
  const std::string& evaluated() const { return kind == "sweep" ? target : kind; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError(where + ": empty value");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) throw ConfigError(where + ": not a number: " + t);
  return v;
}

inline std::int64_t parse_integer(const std::string& text, const std::string& where) {
  const double v = parse_number(text, where);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(where + ": not an integer: " + text);
  return static_cast<std::int64_t>(v);
}

inline std::vector<double> parse_list(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_number(item, where));
      continue;
    }
    std::string lo = trim(item.substr(0, dots)), hi = trim(item.substr(dots + 2));
    const bool pow2 = lo.rfind("2^", 0) == 0 && hi.rfind("2^", 0) == 0;
    if (pow2) {
      lo = lo.substr(2);
      hi = hi.substr(2);
    }
    const std::int64_t a = parse_integer(lo, where), b = parse_integer(hi, where);
    if (b < a || b - a > 100000) throw ConfigError(where + ": bad range " + item);
    if (pow2 && (a < 0 || b > 52)) throw ConfigError(where + ": power of two out of range");
    for (std::int64_t k = a; k <= b; ++k) out.push_back(pow2 ? std::ldexp(1.0, static_cast<int>(k)) : static_cast<double>(k));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment registry

using Point = std::map<std::string, double>;

struct Outcome {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::optional<double> oracle;
  std::optional<double> tolerance;
  bool pass = true;
  Json extra = Json::object();
};

// A sweep fits y = a + slope x over the axis values; `expected` is the
// declared exponent and `within` its allowed deviation (both sides), or with
// `at_most` set the slope must not exceed expected + within.
struct SlopeDeclaration {
  bool log_x = true;    // x = ln(axis value), else the value itself
  double log_base = std::exp(1.0);
  std::function<double(const Point&)> expected;
  double within = 0.0;
  bool at_most = false;
  std::string describe;
};

struct ExperimentSpec {
  std::string name;
  std::string summary;
  std::vector<std::string> required;  // grid axes
  Point defaults;                     // grid and sample defaults
  std::int64_t max_n = 0;             // capacity limit, 0 for none
  std::int64_t min_n = 1;
  bool sweep_only = false;
  std::function<Outcome(const Point&, std::optional<double> tolerance, std::uint64_t seed, unsigned threads)>
      evaluate;
  std::optional<SlopeDeclaration> slope;
};

inline const std::vector<std::string>& grid_axes() {
  static const std::vector<std::string> axes{"n", "b", "gamma", "alpha", "L", "L_over_n", "t",
                                             "ell", "ell0", "r", "mode", "x"};
  return axes;
}

inline const std::vector<std::string>& sample_keys() {
  static const std::vector<std::string> keys{"M", "cases"};
  return keys;
}

namespace detail {

inline ModelParams model_of(const Point& p) {
  std::optional<double> x;
  if (p.count("x")) x = p.at("x");
  return {static_cast<std::int64_t>(p.at("n")), p.at("b"), p.at("gamma"), p.at("alpha"), x};
}

inline TestFunction sine_mode(const Point& p) { return TestFunction::sine(static_cast<int>(p.at("mode"))); }

inline std::int64_t as_int(const Point& p, const char* key) { return static_cast<std::int64_t>(p.at(key)); }

}  // namespace detail

struct PathAuditSummary {
  std::int64_t cases = 0;
  std::int64_t failures = 0;
  int max_bond_use = 0;
  std::size_t max_length = 0;
};

// Audits build_swap_path on windows x+1..x+ell+ell0 (x = 0) of a torus of
// 2(ell+ell0) sites. cases = 0: every window filling satisfying the cluster
// precondition, both outside fillings, every pair y != z. Otherwise that many
// uniformly random fillings and pairs, redrawn until the precondition holds.
inline PathAuditSummary audit_windows(std::int64_t ell, std::int64_t ell0, std::int64_t cases, std::uint64_t seed) {
  const std::int64_t len = ell + ell0, n = 2 * len;
  const ModelParams params(n, 1.0, 0.5, 1.0);
  PathAuditSummary s;
  auto check = [&](const Configuration& c, std::int64_t y, std::int64_t z) {
    const auto path = build_swap_path(c, 0, y, z, ell, ell0);
    const auto a = audit_swap_path(c, path, 0, y, z, ell, ell0, params);
    ++s.cases;
    s.max_bond_use = std::max(s.max_bond_use, a.max_bond_use);
    s.max_length = std::max(s.max_length, a.length);
    if (!a.endpoint_ok || !a.rates_positive || !a.local || a.max_bond_use > 6 ||
        a.length > static_cast<std::size_t>(12 * len))
      ++s.failures;
  };
  if (cases == 0) {
    if (len > 20) throw CapacityError("exhaustive path audit limited to ell + ell0 <= 20");
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << len); ++bits)
      for (bool outside : {false, true}) {
        Configuration c(n);
        for (std::int64_t i = 1; i <= n; ++i) c.set(i, outside);
        for (std::int64_t k = 0; k < len; ++k) c.set(k + 1, (bits >> k) & 1u);
        if (!is_good_box(c, ell + 1, ell0 - 1)) continue;
        for (std::int64_t y = 1; y <= ell; ++y)
          for (std::int64_t z = 1; z <= ell; ++z)
            if (y != z) check(c, y, z);
      }
    return s;
  }
  Rng rng(seed, 0);
  Configuration c(n);
  for (std::int64_t k = 0; k < cases; ++k) {
    do {
      for (std::int64_t i = 1; i <= n; ++i) c.set(i, rng.bits() & 1u);
    } while (!is_good_box(c, ell + 1, ell0 - 1));
    const auto y = 1 + static_cast<std::int64_t>(rng.bits() % static_cast<std::uint64_t>(ell));
    auto z = 1 + static_cast<std::int64_t>(rng.bits() % static_cast<std::uint64_t>(ell - 1));
    if (z >= y) ++z;
    check(c, y, z);
  }
  return s;
}

inline const std::vector<ExperimentSpec>& experiment_registry() {
  using detail::as_int;
  using detail::model_of;
  static const std::vector<ExperimentSpec> specs = [] {
    std::vector<ExperimentSpec> v;
    const Point model{{"b", 0.0}, {"gamma", 0.5}, {"alpha", 1.0}};
    auto with = [](Point base, const Point& more) {
      for (const auto& [k, x] : more) base[k] = x;
      return base;
    };

    v.push_back({"measure-check", "transfer-matrix partition function against enumeration",
                 {"n", "alpha"}, model, kMaxEnumerationSize, 1, false,
                 [](const Point& p, std::optional<double> tol, std::uint64_t, unsigned) {
                   const auto m = model_of(p);
                   Outcome o;
                   o.estimate = std::exp(spectral(m).log_z);
                   o.oracle = partition_bruteforce(m);
                   o.tolerance = tol.value_or(1e-12);
                   o.extra["rel_error"] = std::abs(o.estimate / *o.oracle - 1.0);
                   o.pass = std::abs(o.estimate / *o.oracle - 1.0) <= *o.tolerance;
                   return o;
                 },
                 std::nullopt});

    v.push_back({"balance-check", "global balance residual of the Gibbs measure",
                 {"n", "b", "gamma", "alpha"}, model, kMaxGeneratorEnumeration, 3, false,
                 [](const Point& p, std::optional<double> tol, std::uint64_t, unsigned) {
                   Outcome o;
                   o.estimate = global_balance_residual(model_of(p));
                   o.oracle = 0.0;
                   o.tolerance = tol.value_or(1e-12);
                   o.pass = o.estimate <= *o.tolerance;
                   return o;
                 },
                 std::nullopt});

    v.push_back({"sample-tv", "TV distance of bridge samples to the enumerated measure",
                 {"n", "alpha"}, with(model, {{"M", 100000}}), kMaxEnumerationSize, 1, false,
                 [](const Point& p, std::optional<double> tol, std::uint64_t seed, unsigned threads) {
                   const auto r = sample_tv(model_of(p), as_int(p, "M"), seed, threads);
                   Outcome o;
                   o.estimate = r.tv;
                   o.oracle = r.expected_floor;
                   o.tolerance = tol.value_or(0.005);
                   o.pass = r.tv <= *o.tolerance;
                   return o;
                 },
                 std::nullopt});

    v.push_back({"clt", "variance and normality of the static fluctuation field",
                 {"n"}, with(model, {{"mode", 1}, {"M", 10000}}), 0, 1, false,
                 [](const Point& p, std::optional<double> tol, std::uint64_t seed, unsigned threads) {
                   const auto M = as_int(p, "M");
                   const auto r = clt_experiment(model_of(p), detail::sine_mode(p), M, seed, threads);
                   Outcome o;
                   o.estimate = r.variance.mean;
                   o.stderr_ = r.variance.stderr_;
                   o.oracle = r.target_variance;
                   o.tolerance = tol.value_or(3.0);
                   const double ks_crit = 1.628 / std::sqrt(static_cast<double>(M));
                   o.extra["ks"] = r.ks;
                   o.extra["ks_critical_1pct"] = ks_crit;
                   o.pass = std::abs(o.estimate - *o.oracle) <= *o.tolerance * o.stderr_ && r.ks < ks_crit;
                   return o;
                 },
                 std::nullopt});

    v.push_back({"qv", "mean quadratic variation of the field martingale",
                 {"n"}, with(model, {{"t", 0.5}, {"mode", 1}, {"M", 64}}), 0, 8, false,
                 [](const Point& p, std::optional<double> tol, std::uint64_t seed, unsigned threads) {
                   const auto r = qv_estimate(model_of(p), detail::sine_mode(p), p.at("t"), as_int(p, "M"), seed,
                                              threads);
                   Outcome o;
                   o.estimate = r.qv.mean;
                   o.stderr_ = r.qv.stderr_;
                   o.oracle = r.limit;
                   o.tolerance = tol.value_or(0.1);
                   o.extra["finite_n_mean"] = r.exact;
                   o.extra["rel_deviation"] = std::abs(r.qv.mean - r.limit) / r.limit;
                   o.pass = std::abs(r.qv.mean - r.limit) <= *o.tolerance * r.limit;
                   return o;
                 },
                 std::nullopt});

    v.push_back({"bg-error", "second-moment of the time-integrated block replacement error",
                 {"n"}, with(model, {{"alpha", 1.5}, {"b", 1.0}, {"t", 0.5}, {"mode", 1}, {"L_over_n", 0.125}, {"M", 32}}),
                 0, 4, false,
                 [](const Point& p, std::optional<double> tol, std::uint64_t seed, unsigned threads) {
                   const auto m = model_of(p);
                   const double L = p.count("L") ? p.at("L") : p.at("L_over_n") * static_cast<double>(m.n());
                   const auto G = detail::sine_mode(p).derivative_function();
                   const auto r = bg_error_mc(m, G, L, p.at("t"), as_int(p, "M"), seed, threads);
                   Outcome o;
                   o.estimate = r.mean;
                   o.stderr_ = r.stderr_;
                   o.tolerance = tol;
                   o.extra["L"] = std::floor(L);
                   o.pass = !tol || r.mean <= *tol;
                   return o;
                 },
                 SlopeDeclaration{true, std::exp(1.0), nullptr, 0.0, false, "fitted only"}});

    v.push_back({"mixing", "empirical two-point correlation against the transfer-matrix value",
                 {"n", "r"}, with(model, {{"M", 10000}}), 0, 2, false,
                 [](const Point& p, std::optional<double> tol, std::uint64_t seed, unsigned threads) {
                   const auto m = model_of(p);
                   const auto r = as_int(p, "r");
                   const auto e = empirical_mixing(m, r, as_int(p, "M"), seed, threads);
                   Outcome o;
                   o.estimate = e.mean;
                   o.stderr_ = e.stderr_;
                   o.oracle = std::abs(centered_correlation(m, {0, r}));
                   o.tolerance = tol.value_or(4.0);
                   o.pass = std::abs(o.estimate - *o.oracle) <= *o.tolerance * o.stderr_ + 1e-12;
                   return o;
                 },
                 std::nullopt});

    v.push_back({"path-audit", "endpoint, positivity, locality and bond usage of constructed swap paths",
                 {"ell", "ell0"}, {{"cases", 0}}, 0, 1, false,
                 [](const Point& p, std::optional<double>, std::uint64_t seed, unsigned) {
                   const auto s = audit_windows(as_int(p, "ell"), as_int(p, "ell0"), as_int(p, "cases"), seed);
                   Outcome o;
                   o.estimate = static_cast<double>(s.failures);
                   o.oracle = 0.0;
                   o.extra["cases"] = s.cases;
                   o.extra["max_bond_use"] = s.max_bond_use;
                   o.extra["max_length"] = s.max_length;
                   o.pass = s.failures == 0 && s.cases > 0;
                   return o;
                 },
                 std::nullopt});

    v.push_back({"assumption1a", "remainder of the second-order expansion of the local rates",
                 {"n", "alpha"}, model, 0, 1, true,
                 [](const Point& p, std::optional<double> tol, std::uint64_t, unsigned) {
                   Outcome o;
                   o.estimate = assumption1a_residual(model_of(p));
                   o.tolerance = tol;
                   o.pass = !tol || o.estimate <= *tol;
                   return o;
                 },
                 SlopeDeclaration{true, std::exp(1.0), [](const Point& p) { return -2.0 * p.at("alpha"); }, 0.1,
                                  false, "slope of ln residual in ln n within 0.1 of -2 alpha"}});

    v.push_back({"bad-set", "probability that a box holds no mobile cluster",
                 {"n", "ell"}, model, 0, 3, true,
                 [](const Point& p, std::optional<double> tol, std::uint64_t, unsigned) {
                   Outcome o;
                   o.estimate = bad_set_probability(model_of(p), 1, as_int(p, "ell"));
                   o.tolerance = tol;
                   o.pass = !tol || o.estimate <= *tol;
                   return o;
                 },
                 SlopeDeclaration{false, 2.0, [](const Point&) { return -1.0 / 3.0; }, 0.05, true,
                                  "slope of log2 probability in ell at most -1/3 + 0.05"}});
    return v;
  }();
  return specs;
}

inline std::vector<std::string> list_experiments() {
  std::vector<std::string> out;
  for (const auto& s : experiment_registry())
    if (!s.sweep_only) out.push_back(s.name);
  out.push_back("sweep");
  return out;
}

inline const ExperimentSpec* find_experiment(const std::string& name) {
  for (const auto& s : experiment_registry())
    if (s.name == name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Parsing and validation

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "config") {
  ExperimentConfig cfg;
  std::string line, section;
  int lineno = 0;
  bool has_grid = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "grid" && section != "samples" && section != "tolerance")
        throw ConfigError(where + ": unknown section [" + section + "]");
      if (section == "grid") has_grid = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    if (section == "run") {
      if (key == "kind") cfg.kind = value;
      else if (key == "target") cfg.target = value;
      else if (key == "axis") cfg.axis = value;
      else if (key == "out") cfg.out = value;
      else if (key == "seed") {
        const auto s = detail::parse_integer(value, where);
        if (s < 0) throw ConfigError(where + ": seed must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(s);
      } else if (key == "repeats") {
        cfg.repeats = detail::parse_integer(value, where);
        if (cfg.repeats < 1) throw ConfigError(where + ": repeats must be positive");
      } else {
        throw ConfigError(where + ": unknown key " + key + " in [run]");
      }
    } else if (section == "grid") {
      if (std::find(grid_axes().begin(), grid_axes().end(), key) == grid_axes().end())
        throw ConfigError(where + ": unknown grid axis " + key);
      if (cfg.grid.count(key)) throw ConfigError(where + ": duplicate grid axis " + key);
      cfg.grid[key] = detail::parse_list(value, where);
    } else if (section == "samples") {
      if (std::find(sample_keys().begin(), sample_keys().end(), key) == sample_keys().end())
        throw ConfigError(where + ": unknown sample key " + key);
      const auto v = detail::parse_integer(value, where);
      if (v < 0) throw ConfigError(where + ": sample counts must be non-negative");
      cfg.samples[key] = static_cast<double>(v);
    } else {
      if (key != "value") throw ConfigError(where + ": the tolerance section takes a single key 'value'");
      cfg.tolerance = detail::parse_number(value, where);
    }
  }
  if (cfg.kind.empty()) throw ConfigError(origin + ": missing kind in [run]");
  if (!has_grid) throw ConfigError(origin + ": missing [grid] section");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  return parse_config(in, path);
}

// Expands the grid into points (last axis fastest, axes in name order) with
// defaults and sample counts filled in, and checks them against the
// experiment's limits.
inline std::vector<Point> expand_grid(const ExperimentConfig& cfg) {
  const std::string& name = cfg.evaluated();
  if (cfg.kind == "sweep") {
    if (cfg.target.empty()) throw ConfigError("sweep needs a target experiment");
    if (cfg.axis.empty()) throw ConfigError("sweep needs an axis");
  } else if (!cfg.target.empty() || !cfg.axis.empty()) {
    throw ConfigError("target and axis are only meaningful for sweeps");
  }
  const ExperimentSpec* spec = find_experiment(name);
  if (!spec) throw ConfigError("unknown experiment kind: " + name);
  if (spec->sweep_only && cfg.kind != "sweep") throw ConfigError(name + " is only available as a sweep target");
  for (const auto& [axis, values] : cfg.grid)
    if (values.empty()) throw ConfigError("grid axis " + axis + " is empty");
  for (const auto& r : spec->required)
    if (!cfg.grid.count(r) && !spec->defaults.count(r)) throw ConfigError(name + " needs grid axis " + r);
  if (cfg.kind == "sweep") {
    const auto it = cfg.grid.find(cfg.axis);
    if (it == cfg.grid.end()) throw ConfigError("sweep axis " + cfg.axis + " is not in the grid");
    if (it->second.size() < 2) throw ConfigError("slope fitting needs at least two values on axis " + cfg.axis);
  }

  std::vector<Point> points{Point{}};
  for (const auto& [axis, values] : cfg.grid) {
    std::vector<Point> next;
    for (const auto& p : points)
      for (double v : values) {
        Point q = p;
        q[axis] = v;
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  for (auto& p : points) {
    for (const auto& [k, v] : spec->defaults)
      if (!p.count(k)) p[k] = v;
    for (const auto& [k, v] : cfg.samples) p[k] = v;
    if (p.count("n")) {
      const double n = p.at("n");
      if (n != std::floor(n)) throw ConfigError("n must be an integer");
      if (spec->max_n > 0 && n > static_cast<double>(spec->max_n))
        throw CapacityError(name + " enumerates the state space and is limited to n <= " + std::to_string(spec->max_n));
      if (n < static_cast<double>(spec->min_n)) throw ConfigError(name + " needs n >= " + std::to_string(spec->min_n));
    }
    for (const char* k : {"M", "ell", "ell0", "r", "mode"})
      if (p.count(k) && p.at(k) != std::floor(p.at(k))) throw ConfigError(std::string(k) + " must be an integer");
    if (p.count("M") && p.at("M") < 1) throw ConfigError("M must be positive");
    if (p.count("n") && p.count("alpha")) {
      try {
        (void)detail::model_of(p);
      } catch (const InvalidParams& e) {
        throw ConfigError(std::string("invalid model parameters: ") + e.what());
      }
    }
  }
  return points;
}

// ---------------------------------------------------------------------------
// Records

namespace detail {

inline Json number(double v) {
  if (v == std::floor(v) && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  return v;
}

inline Json optional_number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

}  // namespace detail

inline Json config_echo(const ExperimentConfig& cfg) {
  Json j;
  j["kind"] = cfg.kind;
  if (cfg.kind == "sweep") {
    j["target"] = cfg.target;
    j["axis"] = cfg.axis;
  }
  j["seed"] = cfg.seed;
  j["repeats"] = cfg.repeats;
  Json g = Json::object();
  for (const auto& [k, vs] : cfg.grid) {
    Json a = Json::array();
    for (double v : vs) a.push_back(detail::number(v));
    g[k] = a;
  }
  j["grid"] = g;
  Json s = Json::object();
  for (const auto& [k, v] : cfg.samples) s[k] = detail::number(v);
  j["samples"] = s;
  j["tolerance"] = detail::optional_number(cfg.tolerance);
  return j;
}

inline Json make_record(const std::string& kind, const Point& p, std::int64_t replicate, std::uint64_t seed,
                        const Outcome& o, const Json& echo, double seconds) {
  Json r;
  r["kind"] = kind;
  r["replicate"] = replicate;
  Json params = Json::object();
  for (const auto& [k, v] : p) params[k] = detail::number(v);
  r["params"] = params;
  r["estimate"] = o.estimate;
  r["stderr"] = o.stderr_;
  r["oracle"] = o.oracle ? Json(*o.oracle) : Json(nullptr);
  r["tolerance"] = detail::optional_number(o.tolerance);
  r["pass"] = o.pass;
  r["seed"] = seed;
  r["detail"] = o.extra;
  r["config"] = echo;
  r["duration_s"] = seconds;
  return r;
}

// Columns of the CSV export, in order. Missing parameters and null oracles
// or tolerances are left empty; numbers are written exactly as in the JSON
// store so the conversion is lossless.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "kind",  "replicate", "seed",     "n",      "b",        "gamma", "alpha",    "L",
      "L_over_n", "t",      "ell",      "ell0",   "r",        "mode",  "x",        "M",
      "cases", "estimate",  "stderr",   "oracle", "tolerance", "pass", "duration_s"};
  return cols;
}

inline std::string csv_cell(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return v.dump();
}

inline void write_csv_header(std::ostream& out) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
}

inline void write_csv_row(std::ostream& out, const Json& rec) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto& c = cols[i];
    Json v = nullptr;
    if (rec.contains(c)) v = rec[c];
    else if (rec.contains("params") && rec["params"].contains(c)) v = rec["params"][c];
    out << (i ? "," : "") << csv_cell(v);
  }
  out << "\n";
}

inline std::vector<Json> read_jsonl(std::istream& in, const std::string& origin = "records") {
  std::vector<Json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw IoError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

enum class Format { Jsonl, Csv };

inline Format parse_format(const std::string& s) {
  if (s == "jsonl") return Format::Jsonl;
  if (s == "csv") return Format::Csv;
  throw ConfigError("format must be csv or jsonl");
}

inline void write_records(std::ostream& out, const std::vector<Json>& recs, Format f) {
  if (f == Format::Csv) write_csv_header(out);
  for (const auto& r : recs) {
    if (f == Format::Jsonl) out << r.dump() << "\n";
    else write_csv_row(out, r);
  }
}

// Streams records to a file or stdout as they are produced.
class RecordSink {
 public:
  RecordSink(std::ostream& out, Format f) : out_(&out), format_(f) {
    if (f == Format::Csv) write_csv_header(*out_);
  }
  void write(const Json& r) {
    if (format_ == Format::Jsonl) *out_ << r.dump() << "\n";
    else write_csv_row(*out_, r);
    out_->flush();
  }

 private:
  std::ostream* out_;
  Format format_;
};

// ---------------------------------------------------------------------------
// Running

struct RunReport {
  std::vector<Json> records;
  bool all_pass = true;
};

// Grid points and replicates run in a worker pool. A single task gets all
// the threads for its own replicas; otherwise each task runs serially. Either
// way the estimates are identical. Records are emitted in grid order.
inline RunReport run_grid(const ExperimentConfig& cfg, unsigned threads,
                          const std::function<void(const Json&)>& emit = nullptr) {
  const auto points = expand_grid(cfg);
  const ExperimentSpec* spec = find_experiment(cfg.evaluated());
  const Json echo = config_echo(cfg);
  const std::size_t tasks = points.size() * static_cast<std::size_t>(cfg.repeats);
  threads = resolve_threads(threads);
  const unsigned inner = tasks > 1 ? 1u : threads;
  std::vector<std::optional<Json>> slots(tasks);
  std::size_t next_emit = 0;
  std::mutex mu;
  parallel_for(tasks, tasks > 1 ? threads : 1u, [&](std::size_t i) {
    const auto& p = points[i / static_cast<std::size_t>(cfg.repeats)];
    const auto rep = static_cast<std::int64_t>(i % static_cast<std::size_t>(cfg.repeats));
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = spec->evaluate(p, cfg.tolerance, seed, inner);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json rec = make_record(spec->name, p, rep, seed, o, echo, secs);
    std::lock_guard<std::mutex> lk(mu);
    slots[i] = std::move(rec);
    while (next_emit < tasks && slots[next_emit]) {
      if (emit) emit(*slots[next_emit]);
      ++next_emit;
    }
  });
  RunReport rep;
  for (auto& s : slots) {
    rep.all_pass = rep.all_pass && (*s)["pass"].get<bool>();
    rep.records.push_back(std::move(*s));
  }
  return rep;
}

struct SweepRow {
  double axis_value = 0.0;
  double estimate = 0.0;
  double stderr_ = 0.0;
};

struct SweepGroup {
  Point fixed;  // values of the other axes
  std::vector<SweepRow> rows;
  std::optional<double> slope;
  std::optional<double> expected;
  bool pass = true;
};

// Fits the declared slope per group of the other axes. Replicates of a
// point are averaged first. Non-positive estimates cannot be fitted on a
// log scale and leave the slope empty (and the group failing if a slope was
// declared).
inline std::vector<SweepGroup> summarize_sweep(const ExperimentConfig& cfg, const std::vector<Json>& records) {
  const ExperimentSpec* spec = find_experiment(cfg.target);
  std::map<Point, std::map<double, RunningStats>> by_group;
  std::map<Point, std::map<double, double>> se;
  for (const auto& r : records) {
    Point fixed;
    double axis_value = 0.0;
    for (const auto& [k, v] : r["params"].items()) {
      if (k == cfg.axis) axis_value = v.get<double>();
      else if (cfg.grid.count(k)) fixed[k] = v.get<double>();
    }
    by_group[fixed][axis_value].add(r["estimate"].get<double>());
    se[fixed][axis_value] = r["stderr"].get<double>();
  }
  std::vector<SweepGroup> out;
  for (const auto& [fixed, rows] : by_group) {
    SweepGroup g;
    g.fixed = fixed;
    std::vector<double> xs, ys;
    bool fittable = true;
    for (const auto& [a, st] : rows) {
      const double sev = st.count() > 1 ? st.stderr_mean() : se[fixed][a];
      g.rows.push_back({a, st.mean(), sev});
      if (!(st.mean() > 0.0) || (spec->slope && spec->slope->log_x && !(a > 0.0))) fittable = false;
      if (!spec->slope) continue;
      xs.push_back(spec->slope->log_x ? std::log(a) : a);
      ys.push_back(std::log(st.mean()) / std::log(spec->slope->log_base));
    }
    if (spec->slope) {
      if (fittable) g.slope = least_squares(xs, ys).slope;
      if (spec->slope->expected) {
        Point full = fixed;
        for (const auto& [k, v] : spec->defaults)
          if (!full.count(k)) full[k] = v;
        g.expected = spec->slope->expected(full);
        if (!g.slope) g.pass = false;
        else if (spec->slope->at_most) g.pass = *g.slope <= *g.expected + spec->slope->within;
        else g.pass = std::abs(*g.slope - *g.expected) <= spec->slope->within;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline Json sweep_record(const ExperimentConfig& cfg, const SweepGroup& g) {
  Json r;
  r["kind"] = "sweep";
  r["target"] = cfg.target;
  r["axis"] = cfg.axis;
  Json fixed = Json::object();
  for (const auto& [k, v] : g.fixed) fixed[k] = detail::number(v);
  r["params"] = fixed;
  Json rows = Json::array();
  for (const auto& row : g.rows) rows.push_back({detail::number(row.axis_value), row.estimate, row.stderr_});
  r["rows"] = rows;
  r["slope"] = g.slope ? Json(*g.slope) : Json(nullptr);
  r["expected"] = g.expected ? Json(*g.expected) : Json(nullptr);
  r["pass"] = g.pass;
  r["seed"] = cfg.seed;
  r["config"] = config_echo(cfg);
  return r;
}

inline void print_sweep_table(std::ostream& out, const ExperimentConfig& cfg, const std::vector<SweepGroup>& groups) {
  const ExperimentSpec* spec = find_experiment(cfg.target);
  for (const auto& g : groups) {
    out << "# " << cfg.target << " over " << cfg.axis;
    for (const auto& [k, v] : g.fixed) out << " " << k << "=" << detail::number(v).dump();
    out << "\n" << cfg.axis << "\testimate\tstderr\n";
    for (const auto& r : g.rows)
      out << detail::number(r.axis_value).dump() << "\t" << Json(r.estimate).dump() << "\t" << Json(r.stderr_).dump()
          << "\n";
    if (g.slope) out << "slope\t" << Json(*g.slope).dump() << "\n";
    else if (spec->slope) out << "slope\tunavailable\n";
    if (g.expected)
      out << "expected\t" << Json(*g.expected).dump() << " (" << spec->slope->describe << ")\t"
          << (g.pass ? "PASS" : "FAIL") << "\n";
  }
}

}  // namespace kls
