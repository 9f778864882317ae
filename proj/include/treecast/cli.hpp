#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "treecast/correction.hpp"
#include "treecast/error.hpp"
#include "treecast/estimators.hpp"
#include "treecast/exact.hpp"
#include "treecast/fk.hpp"
#include "treecast/report.hpp"
#include "treecast/verification.hpp"

namespace treecast::cli {

enum ExitCode : int { Ok = 0, Failure = 1, Domain = 2, OverBudget = 3, GateFailed = 4 };

// "3", "1..4", "1,3,5" or a mix such as "1..3,6".
inline std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  const auto to_int = [&text](const std::string& s) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || v < 1 || v > 4096) {
      throw DomainError("bad k list '" + text + "': expected integers >= 1 such as 3, 1..4 or 1,3");
    }
    return static_cast<int>(v);
  };
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      ks.push_back(to_int(item));
      continue;
    }
    const int a = to_int(item.substr(0, dots));
    const int b = to_int(item.substr(dots + 2));
    if (b < a) throw DomainError("bad k range '" + item + "'");
    for (int k = a; k <= b; ++k) ks.push_back(k);
  }
  if (ks.empty()) throw DomainError("empty k list");
  return ks;
}

inline PinMode parse_pin(const std::string& s) {
  if (s == "true-root") return PinMode::TrueRoot;
  if (s == "renormalized-root") return PinMode::RenormalizedRoot;
  throw DomainError("unknown pin mode '" + s + "' (true-root | renormalized-root)");
}

// Resolved settings: command-line flags first, then the --config file.
struct Settings {
  std::string command;
  std::optional<std::uint64_t> r;
  std::optional<std::string> k;
  std::optional<std::uint64_t> M;
  std::optional<double> eps;
  std::optional<double> p;
  std::optional<int> depth;
  std::optional<std::string> scheme;
  std::optional<std::uint64_t> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> budget;
  std::optional<std::uint64_t> samples;
  std::optional<double> tol;
  std::optional<double> threshold;
  std::optional<std::string> pin;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::optional<bool> exact;
  std::optional<bool> reproducible;
  std::string suite;
  std::string grid;
  nlohmann::json grid_spec;

  [[nodiscard]] Budget resolved_budget() const {
    Budget b = Budget::from_env();
    if (budget) b.support = *budget;
    return b;
  }

  [[nodiscard]] ChannelParams channel() const {
    if (eps && p) throw DomainError("give either eps or p, not both");
    if (eps) return ChannelParams::from_epsilon(*eps);
    if (p) return ChannelParams::from_p(*p);
    throw DomainError(command + " needs --eps or --p");
  }

  [[nodiscard]] std::uint64_t branching() const {
    const auto v = r.value_or(2);
    detail::require(v >= 2 && v <= 64, "branching rate r must lie in [2, 64]");
    return v;
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    const auto put = [&j](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    put("r", r);
    put("k", k);
    put("M", M);
    put("eps", eps);
    put("p", p);
    put("depth", depth);
    put("scheme", scheme);
    put("replicates", replicates);
    put("seed", seed);
    put("budget", budget);
    put("samples", samples);
    put("tol", tol);
    put("threshold", threshold);
    put("pin", pin);
    put("exact", exact);
    if (!suite.empty()) j["suite"] = suite;
    if (!grid.empty()) j["grid"] = grid;
    if (!grid_spec.is_null()) j["grid_spec"] = grid_spec;
    return j;
  }
};

namespace detail {

template <class T>
void merge_key(std::optional<T>& field, const nlohmann::json& cfg, const char* key) {
  if (field || !cfg.contains(key)) return;
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      // k may be given as a bare integer
      field = cfg[key].is_number_integer() ? std::to_string(cfg[key].get<long>()) : cfg[key].get<std::string>();
    } else {
      field = cfg[key].get<T>();
    }
  } catch (const nlohmann::json::exception&) {
    throw DomainError(std::string("config key '") + key + "' has the wrong type");
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void merge_config(Settings& s, const std::string& path) {
  const auto cfg = read_json_file(path);
  if (!cfg.is_object()) throw DomainError("config file must hold a JSON object");
  static const std::vector<std::string> known{"r",       "k",   "M",         "eps", "p",      "depth",
                                              "scheme",  "replicates", "seed", "budget", "samples",
                                              "tol",     "threshold",  "pin",  "format", "out",    "exact",
                                              "reproducible"};
  for (const auto& [key, _] : cfg.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw DomainError("unknown config key '" + key + "'");
    }
  }
  // eps and p are one setting: a flag for either hides both config keys
  const bool channel_from_flags = s.eps || s.p;
  merge_key(s.r, cfg, "r");
  merge_key(s.k, cfg, "k");
  merge_key(s.M, cfg, "M");
  if (!channel_from_flags) {
    merge_key(s.eps, cfg, "eps");
    merge_key(s.p, cfg, "p");
  }
  merge_key(s.depth, cfg, "depth");
  merge_key(s.scheme, cfg, "scheme");
  merge_key(s.replicates, cfg, "replicates");
  merge_key(s.seed, cfg, "seed");
  merge_key(s.budget, cfg, "budget");
  merge_key(s.samples, cfg, "samples");
  merge_key(s.tol, cfg, "tol");
  merge_key(s.threshold, cfg, "threshold");
  merge_key(s.pin, cfg, "pin");
  merge_key(s.format, cfg, "format");
  merge_key(s.out, cfg, "out");
  merge_key(s.exact, cfg, "exact");
  merge_key(s.reproducible, cfg, "reproducible");
}

// Every numeric field is checked here, before any computation starts.
inline void validate(const Settings& s) {
  using treecast::detail::require;
  if (s.r) require(*s.r >= 2 && *s.r <= 64, "branching rate r must lie in [2, 64]");
  if (s.k) (void)parse_k_list(*s.k);
  if (s.M) require(*s.M >= 1, "block size M must be >= 1");
  if (s.eps && s.p) throw DomainError("give either eps or p, not both");
  if (s.eps || s.p) (void)s.channel();
  if (s.depth) require(*s.depth >= 0 && *s.depth <= 4096, "depth must lie in [0, 4096]");
  if (s.scheme) (void)CorrectionScheme::parse(*s.scheme);
  if (s.replicates) require(*s.replicates >= 1, "replicates must be >= 1");
  if (s.budget) require(*s.budget >= 2, "budget must be >= 2");
  if (s.samples) require(*s.samples >= 1, "samples must be >= 1");
  if (s.tol) require(*s.tol > 0.0 && *s.tol < 0.1, "tol must lie in (0, 0.1)");
  if (s.threshold) require(*s.threshold > 0.0, "threshold factor must be > 0");
  if (s.pin) (void)parse_pin(*s.pin);
  if (s.format) require(*s.format == "csv" || *s.format == "json", "format must be csv or json");
  (void)s.resolved_budget();
}

inline std::string params(std::initializer_list<std::pair<const char*, std::string>> kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    if (!out.empty()) out += ';';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

inline std::string num(double x) { return format_number(x); }

inline ReportRow exact_row(std::string exp, std::string par, std::string q, double v, std::string tol = "1e-12") {
  ReportRow row;
  row.experiment = std::move(exp);
  row.parameters = std::move(par);
  row.quantity = std::move(q);
  row.value = v;
  row.provenance = "exact";
  row.tolerance = std::move(tol);
  return row;
}

inline ReportRow mc_row(std::string exp, std::string par, std::string q, double v, double lo, double hi) {
  ReportRow row;
  row.experiment = std::move(exp);
  row.parameters = std::move(par);
  row.quantity = std::move(q);
  row.value = v;
  row.lo = lo;
  row.hi = hi;
  row.provenance = "mc";
  return row;
}

inline SeedSpec seed_of(const Settings& s) { return SeedSpec{s.seed.value_or(1), 0}; }

// ---- subcommands ----------------------------------------------------------

inline void cmd_eps_k(const Settings& s, Report& rep) {
  const auto r = s.branching();
  const auto ch = s.channel();
  const auto budget = s.resolved_budget();
  const bool exact_only = s.exact.value_or(false);
  for (const int k : parse_k_list(s.k.value_or("1"))) {
    const auto par = params({{"r", std::to_string(r)}, {"eps", num(ch.epsilon)}, {"k", std::to_string(k)}});
    const double tilde = fraction_error_rate(k, ch.epsilon);
    try {
      const double ek = effective_error_rate(k, r, ch.epsilon, budget);
      rep.rows.push_back(exact_row("eps-k", par, "eps_k", ek));
      rep.rows.push_back(exact_row("eps-k", par, "eps_tilde_k", tilde));
      rep.rows.push_back(exact_row("eps-k", par, "T_k", t_statistic(k, r, ch.epsilon, budget)));
      rep.rows.push_back(exact_row("eps-k", par, "p_k", 1.0 - 2.0 * ek));
      continue;
    } catch (const BudgetError&) {
      if (exact_only) throw;
    }
    // Past the exact support: simulate the descent, if a level of r^k fits.
    const auto width = checked_pow(r, k);
    if (!width || *width > budget.vertices_per_level) {
      throw BudgetError("eps_k at r=" + std::to_string(r) + ", k=" + std::to_string(k) +
                        " exceeds both the exact support budget and the simulation budget");
    }
    const auto est = mc_effective_error(CorrectionScheme::descent_majority(k), r, ch.epsilon,
                                        s.replicates.value_or(10000), seed_of(s));
    rep.rows.push_back(mc_row("eps-k", par, "eps_k", est.eps_hat, est.ci.lo, est.ci.hi));
    rep.rows.push_back(exact_row("eps-k", par, "eps_tilde_k", tilde));
    rep.rows.push_back(mc_row("eps-k", par, "T_k", tilde - est.eps_hat, tilde - est.ci.hi, tilde - est.ci.lo));
  }
}

inline void cmd_delta(const Settings& s, Report& rep) {
  const auto r = s.branching();
  const auto ch = s.channel();
  // --M alone is shorthand for block-majority:M
  const auto scheme = s.scheme  ? CorrectionScheme::parse(*s.scheme)
                      : s.M     ? CorrectionScheme::block_majority(*s.M)
                                : CorrectionScheme::identity();
  const int depth = s.depth.value_or(4);
  const auto pin = parse_pin(s.pin.value_or("true-root"));
  const auto budget = s.resolved_budget();
  const auto base = [&](int n) {
    return params({{"r", std::to_string(r)},
                   {"eps", num(ch.epsilon)},
                   {"scheme", scheme.describe()},
                   {"n", std::to_string(n)}});
  };
  if (s.exact.value_or(false)) {
    for (int n = 0; n <= depth; ++n) {
      if (const auto d = exact_counterpart(scheme, r, ch.epsilon, n, pin, budget)) {
        rep.rows.push_back(exact_row("delta", base(n), "delta_n", *d));
      }
    }
    if (rep.rows.empty()) {
      throw DomainError("no exact value for scheme " + scheme.describe() + " up to depth " + std::to_string(depth));
    }
    return;
  }
  McConfig cfg;
  cfg.r = r;
  cfg.replicates = s.replicates.value_or(10000);
  cfg.depth = depth;
  cfg.scheme = scheme;
  cfg.channel = ch;
  cfg.seed = seed_of(s);
  cfg.pin = pin;
  cfg.budget = budget;
  for (const auto& e : mc_delta(cfg)) {
    auto row = mc_row("delta", base(e.n), "delta_n", e.delta_hat, e.ci.lo, e.ci.hi);
    row.tolerance = "se=" + num(e.se);
    rep.rows.push_back(std::move(row));
  }
}

inline std::vector<double> default_p_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 18; ++i) g.push_back(0.05 * i);
  return g;
}

inline void cmd_critical(const Settings& s, Report& rep) {
  const auto r = s.branching();
  const auto budget = s.resolved_budget();
  const double tol = s.tol.value_or(1e-9);
  const auto scheme = s.scheme ? CorrectionScheme::parse(*s.scheme) : CorrectionScheme::identity();
  if (scheme.kind == SchemeKind::Identity || scheme.kind == SchemeKind::WithinDescentMajority) {
    const auto ks = scheme.kind == SchemeKind::Identity ? parse_k_list(s.k.value_or("1..4"))
                                                        : std::vector<int>{scheme.period};
    for (const int k : ks) {
      const auto est = critical_point_k(k, r, tol, budget);
      const auto par = params({{"r", std::to_string(r)}, {"k", std::to_string(k)}});
      auto row = exact_row("critical", par, "p_c_k", est.p_c(), num(tol));
      row.lo = est.p_lo;
      row.hi = est.p_hi;
      rep.rows.push_back(std::move(row));
      rep.rows.push_back(exact_row("critical", par, "p_c_k_times_r", est.p_c() * double(r), num(tol * double(r))));
      rep.rows.push_back(exact_row("critical", par, "objective_monotone", est.monotone ? 1.0 : 0.0, "0"));
    }
    return;
  }
  // Other schemes: Monte Carlo bracket, plus exact bounds where they exist.
  const int level = s.depth.value_or(8);
  const auto bracket = mc_critical_bracket(scheme, r, level, default_p_grid(), s.replicates.value_or(2000),
                                           seed_of(s), BracketConfig{0.1, 4.0, parse_pin(s.pin.value_or("true-root")),
                                                                     budget, 0});
  const auto base = params({{"r", std::to_string(r)}, {"scheme", scheme.describe()}, {"level", std::to_string(level)}});
  for (const auto& g : bracket.grid) {
    auto row = mc_row("critical", base + ";p=" + num(g.p), "delta_n", g.estimate.delta_hat, g.estimate.ci.lo,
                      g.estimate.ci.hi);
    row.status = verdict_name(g.verdict);
    rep.rows.push_back(std::move(row));
  }
  auto b = mc_row("critical", base, "p_c_bracket", 0.5 * (bracket.p_lo + bracket.p_hi), bracket.p_lo, bracket.p_hi);
  b.tolerance = "floor=0.1;sigmas=4";
  rep.rows.push_back(std::move(b));
  if (scheme.kind == SchemeKind::WithinDescentMinorityRemoval) {
    const auto rb = minority_removal_bounds(scheme.period, r, tol, budget);
    const auto par = params({{"r", std::to_string(r)}, {"k", std::to_string(scheme.period)}});
    rep.rows.push_back(exact_row("critical", par, "removal_lower", rb.lower, num(tol)));
    rep.rows.push_back(exact_row("critical", par, "removal_upper", rb.upper, num(tol)));
  }
}

inline void cmd_fk_stats(const Settings& s, Report& rep, std::ostream& err) {
  const auto r = s.branching();
  const double p = s.channel().p;
  const auto ks = parse_k_list(s.k.value_or("1..8"));
  const auto samples = s.samples.value_or(200);
  const auto budget = s.resolved_budget();
  const auto seed = seed_of(s);
  const double rd = double(r);
  const auto base = params({{"r", std::to_string(r)}, {"p", num(p)}, {"samples", std::to_string(samples)}});

  const auto mr = moment_bound_report(p, r, ks, samples, seed, false, budget);
  auto flag = exact_row("fk-stats", base + ";p2r=" + num(p * p * rd) + ";pr=" + num(p * rd), "regime_p2r_lt_1_lt_pr",
                        mr.regime_ok ? 1.0 : 0.0, "0");
  flag.status = mr.regime_ok ? "in-regime" : "out-of-regime";
  rep.rows.push_back(std::move(flag));
  if (!mr.regime_ok) err << "warning: p^2 r < 1 < p r does not hold; moment bounds are not expected\n";

  const double z = normal_quantile(0.99);
  for (const auto& m : mr.per_k) {
    const auto par = base + ";k=" + std::to_string(m.k);
    const auto q = [&](const char* name, const Quantiles& v) {
      rep.rows.push_back(mc_row("fk-stats", par, std::string(name) + "_median", v.median, v.min, v.max));
    };
    q("sum_z2_over_rk", m.z2_ratio);
    q("sum_z3_over_pr2k", m.z3_ratio);
    q("m_k", m.m_k);
    rep.rows.push_back(mc_row("fk-stats", par, "W_mean", m.mean_W, m.mean_W - z * m.se_W, m.mean_W + z * m.se_W));
  }
  if (s.threshold) {
    for (const int k : ks) {
      const auto t = tail_probe_Rk(p, r, k, *s.threshold, samples, seed);
      const auto ci = wilson_interval(t.hits, t.samples, z);
      auto row = mc_row("fk-stats", base + ";k=" + std::to_string(k) + ";factor=" + num(*s.threshold),
                        "P_Rk_ge_threshold", t.frequency(), ci.lo, ci.hi);
      if (t.near_critical) row.status = "near-critical";
      rep.rows.push_back(std::move(row));
    }
  }
}

inline bool cmd_verify(const Settings& s, Report& rep, std::ostream& err) {
  const auto all = verify::suites();
  std::vector<verify::SuiteEntry> chosen;
  for (const auto& e : all) {
    if (s.suite == "all" || s.suite == e.name) chosen.push_back(e);
  }
  if (chosen.empty()) {
    std::string names;
    for (const auto& e : all) names += std::string(" ") + e.name;
    throw DomainError("unknown suite '" + s.suite + "'; known:" + names + " all");
  }
  bool ok = true;
  for (const auto& e : chosen) {
    const auto res = e.run();
    for (const auto& c : res.checks) {
      ReportRow row;
      row.experiment = res.suite;
      row.parameters = c.detail;
      row.quantity = c.name;
      row.value = c.measured;
      row.provenance = "gate";
      row.tolerance = c.required;
      row.status = c.passed ? "pass" : "fail";
      rep.rows.push_back(std::move(row));
    }
    err << res.suite << ": " << (res.passed() ? "PASS" : "FAIL") << " (" << verify::detail::fmt(res.seconds, 3)
        << " s)\n";
    ok = ok && res.passed();
  }
  return ok;
}

// A value or a list of values, as a list.
template <class T>
std::vector<T> axis(const nlohmann::json& g, const char* key, std::optional<T> fallback) {
  if (!g.contains(key)) {
    if (!fallback) throw DomainError(std::string("grid needs '") + key + "'");
    return {*fallback};
  }
  std::vector<T> out;
  try {
    if (g[key].is_array()) {
      for (const auto& v : g[key]) out.push_back(v.get<T>());
    } else {
      out.push_back(g[key].get<T>());
    }
  } catch (const nlohmann::json::exception&) {
    throw DomainError(std::string("grid key '") + key + "' has the wrong type");
  }
  if (out.empty()) throw DomainError(std::string("grid axis '") + key + "' is empty");
  return out;
}

// One row per (r, scheme, channel, depth) cell; each cell has its own seed.
inline void cmd_sweep(Settings& s, Report& rep) {
  const auto g = read_json_file(s.grid);
  if (!g.is_object()) throw DomainError("grid file must hold a JSON object");
  s.grid_spec = g;
  for (const auto& [key, _] : g.items()) {
    static const std::vector<std::string> known{"r",    "scheme", "eps", "p",   "depth",
                                                "replicates", "seed", "pin", "exact"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw DomainError("unknown grid key '" + key + "'");
    }
  }
  if (g.contains("eps") && g.contains("p")) throw DomainError("grid gives both eps and p");
  const auto rs = axis<std::uint64_t>(g, "r", s.r.value_or(2));
  const auto schemes = axis<std::string>(g, "scheme", s.scheme.value_or("identity"));
  const bool by_p = g.contains("p") || (!g.contains("eps") && s.p);
  const auto chans = by_p ? axis<double>(g, "p", s.p) : axis<double>(g, "eps", s.eps);
  const auto depths = axis<int>(g, "depth", s.depth);
  if (!s.replicates && g.contains("replicates")) s.replicates = g["replicates"].get<std::uint64_t>();
  if (!s.seed && g.contains("seed")) s.seed = g["seed"].get<std::uint64_t>();
  if (!s.pin && g.contains("pin")) s.pin = g["pin"].get<std::string>();
  if (!s.exact && g.contains("exact")) s.exact = g["exact"].get<bool>();

  // validate the whole grid before running any cell
  std::vector<ChannelParams> channels;
  for (const auto r : rs) treecast::detail::require(r >= 2 && r <= 64, "grid r must lie in [2, 64]");
  for (const auto& sc : schemes) (void)CorrectionScheme::parse(sc);
  for (const double c : chans) channels.push_back(by_p ? ChannelParams::from_p(c) : ChannelParams::from_epsilon(c));
  for (const int d : depths) treecast::detail::require(d >= 0 && d <= 4096, "grid depth must lie in [0, 4096]");
  const auto pin = parse_pin(s.pin.value_or("true-root"));
  const bool exact = s.exact.value_or(false);
  const auto budget = s.resolved_budget();
  const std::uint64_t master = s.seed.value_or(1);

  std::uint64_t cell = 0;
  for (const auto r : rs) {
    for (const auto& sc : schemes) {
      const auto scheme = CorrectionScheme::parse(sc);
      for (const auto& ch : channels) {
        for (const int d : depths) {
          const auto par = params({{"r", std::to_string(r)},
                                   {"scheme", scheme.describe()},
                                   {"eps", num(ch.epsilon)},
                                   {"n", std::to_string(d)}});
          if (exact) {
            const auto v = exact_counterpart(scheme, r, ch.epsilon, d, pin, budget);
            if (!v) throw DomainError("no exact value for cell " + par);
            rep.rows.push_back(exact_row("sweep", par, "delta_n", *v));
          } else {
            McConfig cfg;
            cfg.r = r;
            cfg.replicates = s.replicates.value_or(2000);
            cfg.depth = d;
            cfg.scheme = scheme;
            cfg.channel = ch;
            cfg.seed = SeedSpec{mix64(master ^ (0x9e3779b97f4a7c15ULL * (cell + 1))), 0};
            cfg.pin = pin;
            cfg.budget = budget;
            const auto e = mc_delta(cfg).back();
            auto row = mc_row("sweep", par, "delta_n", e.delta_hat, e.ci.lo, e.ci.hi);
            row.tolerance = "se=" + num(e.se);
            rep.rows.push_back(std::move(row));
          }
          ++cell;
        }
      }
    }
  }
}

template <class T>
void capture(CLI::Option* opt, const T& value, std::optional<T>& field) {
  if (opt->count() > 0) field = value;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 ok, 2 domain error, 3 over budget, 4 a verification gate failed.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noisy broadcast on regular trees: exact engine and simulator", "treecast"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t r = 2;
  std::string k;
  std::uint64_t M = 1;
  double eps = 0.0;
  double p = 1.0;
  int depth = 0;
  std::string scheme;
  std::uint64_t replicates = 0;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;
  std::uint64_t samples = 0;
  double tol = 0.0;
  double threshold = 0.0;
  std::string pin;
  std::string format = "csv";
  std::string out_path;
  std::string config_path;
  bool exact = false;
  bool reproducible = false;

  auto* o_r = app.add_option("--r", r, "branching rate");
  auto* o_k = app.add_option("--k", k, "k, a range 1..4 or a list 1,3");
  auto* o_M = app.add_option("--M", M, "block size");
  auto* o_eps = app.add_option("--eps", eps, "flip probability in [0, 1/2)");
  auto* o_p = app.add_option("--p", p, "channel strength 1 - 2 eps");
  o_eps->excludes(o_p);
  auto* o_depth = app.add_option("--depth", depth, "number of levels");
  auto* o_scheme = app.add_option("--scheme", scheme, "correction scheme, e.g. descent-majority:2");
  auto* o_reps = app.add_option("--replicates", replicates, "Monte Carlo replicates");
  auto* o_seed = app.add_option("--seed", seed, "master seed");
  auto* o_budget = app.add_option("--budget", budget, "exact support budget (overrides TREECAST_BUDGET)");
  auto* o_samples = app.add_option("--samples", samples, "FK samples");
  auto* o_tol = app.add_option("--tol", tol, "bisection tolerance");
  auto* o_threshold = app.add_option("--threshold", threshold, "R_k tail probe factor");
  auto* o_pin = app.add_option("--pin", pin, "true-root | renormalized-root");
  auto* o_format = app.add_option("--format", format, "csv | json");
  auto* o_out = app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--config", config_path, "JSON file of defaults; flags win");
  auto* o_exact = app.add_flag("--exact", exact, "exact engine only");
  auto* o_repro = app.add_flag("--reproducible", reproducible, "omit the timestamp line");

  auto* c_eps = app.add_subcommand("eps-k", "effective error rates eps(k), eps~(k) and T");
  auto* c_delta = app.add_subcommand("delta", "Delta_n, simulated or exact");
  auto* c_crit = app.add_subcommand("critical", "critical p_c(k), or a Monte Carlo bracket for other schemes");
  auto* c_fk = app.add_subcommand("fk-stats", "FK cluster moments per level");
  auto* c_verify = app.add_subcommand("verify", "run a verification suite");
  auto* c_sweep = app.add_subcommand("sweep", "Delta over a JSON grid");
  Settings s;
  c_verify->add_option("suite", s.suite, "suite name or 'all'")->required();
  c_sweep->add_option("grid", s.grid, "grid JSON file")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return Ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return Domain;
  }

  for (auto* c : app.get_subcommands()) s.command = c->get_name();
  using detail::capture;
  capture(o_r, r, s.r);
  capture(o_k, k, s.k);
  capture(o_M, M, s.M);
  capture(o_eps, eps, s.eps);
  capture(o_p, p, s.p);
  capture(o_depth, depth, s.depth);
  capture(o_scheme, scheme, s.scheme);
  capture(o_reps, replicates, s.replicates);
  capture(o_seed, seed, s.seed);
  capture(o_budget, budget, s.budget);
  capture(o_samples, samples, s.samples);
  capture(o_tol, tol, s.tol);
  capture(o_threshold, threshold, s.threshold);
  capture(o_pin, pin, s.pin);
  capture(o_format, format, s.format);
  capture(o_out, out_path, s.out);
  capture(o_exact, exact, s.exact);
  capture(o_repro, reproducible, s.reproducible);

  try {
    if (!config_path.empty()) detail::merge_config(s, config_path);
    detail::validate(s);

    Report rep;
    bool gates_ok = true;
    if (c_eps->parsed()) detail::cmd_eps_k(s, rep);
    if (c_delta->parsed()) detail::cmd_delta(s, rep);
    if (c_crit->parsed()) detail::cmd_critical(s, rep);
    if (c_fk->parsed()) detail::cmd_fk_stats(s, rep, err);
    if (c_verify->parsed()) gates_ok = detail::cmd_verify(s, rep, err);
    if (c_sweep->parsed()) detail::cmd_sweep(s, rep);
    rep.config = s.to_json();

    std::ofstream file;
    std::ostream* sink = &out;
    if (s.out) {
      file.open(*s.out, std::ios::binary);
      if (!file) throw DomainError("cannot write '" + *s.out + "'");
      sink = &file;
    }
    if (s.format.value_or("csv") == "json") {
      write_json(*sink, rep);
    } else {
      write_csv(*sink, rep, s.reproducible.value_or(false));
    }
    return gates_ok ? Ok : GateFailed;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << '\n';
    return OverBudget;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return Domain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return Failure;
  }
}

}  // namespace treecast::cli
