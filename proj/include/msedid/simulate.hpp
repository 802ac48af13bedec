#pragma once

// Synthetic two-group panels with a differential pre-period trend, plus the
// Monte Carlo driver that compares window-selection rules on them. Both
// data-generating processes share the structure
//
//   Y_it = mu_group + trend_t + effect_it + noise_sd * z_it
//
// where the control group's trend is steeper (slope_control_pre) up to and
// including t* and common (slope_common) afterwards, so a longer pre window
// drags more differential trend into the estimate. The static process turns
// on a constant effect after t*; the dynamic one starts at zero in the
// onset period and grows by `effect` per period.
//
// Draws use mt19937_64 plus an explicit Box-Muller transform rather than
// std::normal_distribution, whose algorithm varies across standard library
// implementations; a config therefore maps to one dataset, bit for bit, on
// a given build. Replication r reseeds with seed ^ splitmix64(r).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "msedid/csv.hpp"
#include "msedid/errors.hpp"
#include "msedid/estimators.hpp"
#include "msedid/panel.hpp"
#include "msedid/selector.hpp"

namespace msedid {

struct SimConfig {
  double mu_treated = 100.0;
  double mu_control = -100.0;
  double slope_common = 10.0;
  double slope_control_pre = 11.0;
  double effect = 100.0;
  double noise_sd = 50.0;  // standard deviation, not variance
  int n_per_group = 50;
  int t_min = -10;
  int t_max = 10;
  int t_star = -1;
  std::uint64_t seed = 42;
};

enum class DgpKind { static_effect, dynamic_effect };

inline const char* dgp_kind_name(DgpKind k) {
  return k == DgpKind::static_effect ? "static" : "dynamic";
}

inline DgpKind parse_dgp_kind(const std::string& s) {
  if (s == "static") return DgpKind::static_effect;
  if (s == "dynamic") return DgpKind::dynamic_effect;
  throw ConfigError("unknown kind '" + s + "' (want static or dynamic)");
}

inline SimConfig static_config() { return SimConfig{}; }

inline SimConfig dynamic_config() {
  SimConfig cfg;
  cfg.slope_control_pre = 7.0;
  cfg.effect = 6.0;  // per-period growth of the effect
  return cfg;
}

inline void validate_config(const SimConfig& cfg) {
  if (!(cfg.noise_sd >= 0.0))
    throw ConfigError("noise_sd must be non-negative, got " + csv::format_double(cfg.noise_sd));
  if (cfg.n_per_group < 1)
    throw ConfigError("n_per_group must be at least 1, got " + std::to_string(cfg.n_per_group));
  if (!(cfg.t_min <= cfg.t_star && cfg.t_star < cfg.t_max))
    throw ConfigError("need t_min <= t_star < t_max, got t_min=" + std::to_string(cfg.t_min) +
                      " t_star=" + std::to_string(cfg.t_star) +
                      " t_max=" + std::to_string(cfg.t_max));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}

  double operator()() {
    if (have_) {
      have_ = false;
      return cached_;
    }
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    have_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 eng_;
  bool have_ = false;
  double cached_ = 0.0;
};

inline PanelDataset generate(DgpKind kind, const SimConfig& cfg) {
  validate_config(cfg);
  NormalSampler z(cfg.seed);
  std::vector<Observation> obs;
  const long per_unit = cfg.t_max - cfg.t_min + 1;
  obs.reserve(static_cast<size_t>(2L * cfg.n_per_group * per_unit));

  for (int g = 0; g < 2; ++g) {
    const bool treated = (g == 0);
    for (int i = 1; i <= cfg.n_per_group; ++i) {
      const std::string id = (treated ? "T" : "C") + std::to_string(i);
      for (int t = cfg.t_min; t <= cfg.t_max; ++t) {
        const double mu = treated ? cfg.mu_treated : cfg.mu_control;
        const double trend =
            (!treated && t <= cfg.t_star) ? cfg.slope_control_pre * t : cfg.slope_common * t;
        double eff = 0.0;
        if (treated && t > cfg.t_star)
          eff = (kind == DgpKind::static_effect)
                    ? cfg.effect
                    : cfg.effect * static_cast<double>(t - cfg.t_star - 1);
        double y = mu + trend + eff;
        if (cfg.noise_sd > 0.0) y += cfg.noise_sd * z();
        obs.push_back({id, t, treated, y});
      }
    }
  }
  return PanelDataset::from_observations(obs, cfg.t_star);
}

// True effect m periods after onset (the first treated period is m = 0).
inline double true_effect(const SimConfig& cfg, DgpKind kind, int periods_since_onset) {
  if (periods_since_onset < 0)
    throw EstimationError("treatment effect undefined before onset (got " +
                          std::to_string(periods_since_onset) + " periods since onset)");
  if (kind == DgpKind::static_effect) return cfg.effect;
  return cfg.effect * static_cast<double>(periods_since_onset);
}

// Sampling variance of the length-ell estimate under iid noise, from the
// balanced two-group closed forms. kappa = n1*n0/(n1+n0), p = ell+1 pre
// periods, q post periods. twfe: sigma^2 (p+q)/(kappa p q); modified event
// study: sigma^2 (1 + 1/p)/kappa for every post coefficient.
inline double analytic_variance(const SimConfig& cfg, ModelKind model, int ell) {
  if (ell < 0) throw ConfigError("negative pre-trends length");
  const double sigma2 = cfg.noise_sd * cfg.noise_sd;
  const double n1 = static_cast<double>(cfg.n_per_group);
  const double kappa = n1 * n1 / (2.0 * n1);
  const double p = static_cast<double>(ell + 1);
  const double q = static_cast<double>(cfg.t_max - cfg.t_star);
  if (model == ModelKind::twfe) return sigma2 * (p + q) / (kappa * p * q);
  if (model == ModelKind::modified_event_study) return sigma2 * (1.0 + 1.0 / p) / kappa;
  throw ConfigError("no analytic variance for event_study");
}

// Oracle inputs implied by a config: the per-period trend gap and the
// analytic variances for every feasible window length up to max_length.
inline OracleSpec oracle_spec(const SimConfig& cfg, ModelKind model, int max_length) {
  OracleSpec spec;
  spec.gamma = cfg.slope_control_pre - cfg.slope_common;
  spec.ell_post = cfg.t_max - cfg.t_star;
  for (int ell = 0; ell <= max_length; ++ell)
    spec.variances[ell] = analytic_variance(cfg, model, ell);
  return spec;
}

// ---- config files ----------------------------------------------------

// Flat key=value files; keys are exactly the SimConfig field names. '#'
// starts a comment, blank lines are skipped.
inline void apply_config_entry(SimConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto as_double = [&](double* out) {
    auto v = csv::parse_double(value);
    if (!v) throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
    *out = *v;
  };
  auto as_int = [&](int* out) {
    auto v = csv::parse_int(value);
    if (!v) throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
    *out = static_cast<int>(*v);
  };
  if (key == "mu_treated") as_double(&cfg.mu_treated);
  else if (key == "mu_control") as_double(&cfg.mu_control);
  else if (key == "slope_common") as_double(&cfg.slope_common);
  else if (key == "slope_control_pre") as_double(&cfg.slope_control_pre);
  else if (key == "effect") as_double(&cfg.effect);
  else if (key == "noise_sd") as_double(&cfg.noise_sd);
  else if (key == "n_per_group") as_int(&cfg.n_per_group);
  else if (key == "t_min") as_int(&cfg.t_min);
  else if (key == "t_max") as_int(&cfg.t_max);
  else if (key == "t_star") as_int(&cfg.t_star);
  else if (key == "seed") {
    auto v = csv::parse_int(value);
    if (!v || *v < 0) throw ConfigError("config key 'seed': cannot parse '" + value + "'");
    cfg.seed = static_cast<std::uint64_t>(*v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline SimConfig parse_config(std::istream& in, SimConfig base = {}) {
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string_view sv = csv::trim(line);
    if (sv.empty()) continue;
    auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key{csv::trim(sv.substr(0, eq))};
    std::string value{csv::trim(sv.substr(eq + 1))};
    apply_config_entry(base, key, value);
  }
  return base;
}

inline SimConfig load_config_file(const std::string& path, SimConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, base);
}

// ---- Monte Carlo -------------------------------------------------------

struct McRule {
  enum class Kind { feasible_mse, oracle, fixed };
  Kind kind = Kind::feasible_mse;
  int fixed_length = 0;

  static McRule feasible() { return {Kind::feasible_mse, 0}; }
  static McRule oracle_rule() { return {Kind::oracle, 0}; }
  static McRule fixed(int ell) { return {Kind::fixed, ell}; }

  static McRule parse(const std::string& s) {
    if (s == "feasible_mse") return feasible();
    if (s == "oracle") return oracle_rule();
    if (s.rfind("fixed(", 0) == 0 && s.back() == ')') {
      auto v = csv::parse_int(s.substr(6, s.size() - 7));
      if (v && *v >= 0) return fixed(static_cast<int>(*v));
    }
    throw ConfigError("unknown rule '" + s + "' (want feasible_mse, oracle or fixed(N))");
  }

  std::string name() const {
    switch (kind) {
      case Kind::feasible_mse: return "feasible_mse";
      case Kind::oracle: return "oracle";
      case Kind::fixed: return "fixed(" + std::to_string(fixed_length) + ")";
    }
    return "?";
  }
};

struct McOptions {
  ModelKind model = ModelKind::twfe;
  std::optional<int> target;  // event time, required for modified_event_study
  SeType se_type = SeType::iid;
  std::optional<int> max_length;
};

struct McRepRecord {
  long replication = 0;
  std::uint64_t seed = 0;
  std::string rule;
  int selected_length = 0;
  double coefficient = 0.0;
  double se = 0.0;
};

struct McRuleSummary {
  std::string rule;
  long n_ok = 0;
  long n_failed = 0;
  double mean_coefficient = 0.0;
  double sd_coefficient = 0.0;
  double mean_se = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  std::map<int, long> selection_counts;
};

struct McSummary {
  long replications = 0;
  int max_length = 0;
  double true_value = 0.0;
  std::vector<McRuleSummary> rules;
  std::vector<McRepRecord> records;
};

namespace detail {

// Aggregation is a plain fold over per-replication records; input order
// does not affect the result beyond float round-off of identical sums.
inline McRuleSummary summarize_rule(const std::string& name,
                                    const std::vector<const McRepRecord*>& recs,
                                    long n_failed, double truth) {
  McRuleSummary s;
  s.rule = name;
  s.n_ok = static_cast<long>(recs.size());
  s.n_failed = n_failed;
  if (recs.empty()) return s;

  double sum = 0.0, sum_se = 0.0, sq_err = 0.0;
  for (const auto* r : recs) {
    sum += r->coefficient;
    sum_se += r->se;
    sq_err += (r->coefficient - truth) * (r->coefficient - truth);
    s.selection_counts[r->selected_length] += 1;
  }
  const double n = static_cast<double>(recs.size());
  s.mean_coefficient = sum / n;
  s.mean_se = sum_se / n;
  s.bias = s.mean_coefficient - truth;
  s.mse = sq_err / n;

  double ss = 0.0;
  for (const auto* r : recs)
    ss += (r->coefficient - s.mean_coefficient) * (r->coefficient - s.mean_coefficient);
  s.sd_coefficient = recs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return s;
}

}  // namespace detail

// Estimand a rule is judged against: the event-time effect at the target
// for event-study models, the across-post average for twfe.
inline double mc_true_value(const SimConfig& cfg, DgpKind kind, const McOptions& opts) {
  if (opts.model == ModelKind::modified_event_study) {
    if (!opts.target) throw ConfigError("modified_event_study needs a target event time");
    return true_effect(cfg, kind, *opts.target - 1);
  }
  const int q = cfg.t_max - cfg.t_star;
  double sum = 0.0;
  for (int m = 0; m < q; ++m) sum += true_effect(cfg, kind, m);
  return sum / static_cast<double>(q);
}

inline McSummary monte_carlo(const SimConfig& cfg, DgpKind kind, long replications,
                             const std::vector<McRule>& rules, const McOptions& opts = {}) {
  validate_config(cfg);
  if (replications < 1)
    throw ConfigError("replications must be at least 1, got " + std::to_string(replications));
  if (rules.empty()) throw ConfigError("no selection rules given");
  if (opts.model == ModelKind::event_study)
    throw ConfigError("monte carlo scans windows; use twfe or modified_event_study");
  if (opts.model == ModelKind::modified_event_study && !opts.target)
    throw ConfigError("modified_event_study needs a target event time");

  const int feasible_max = cfg.t_star - cfg.t_min;
  const int max_length = opts.max_length.value_or(feasible_max);
  if (max_length < 0 || max_length > feasible_max)
    throw ConfigError("max_length " + std::to_string(max_length) +
                      " outside feasible range [0, " + std::to_string(feasible_max) + "]");
  for (const auto& rule : rules)
    if (rule.kind == McRule::Kind::fixed &&
        (rule.fixed_length < 0 || rule.fixed_length > max_length))
      throw ConfigError("rule " + rule.name() + " outside scanned range [0, " +
                        std::to_string(max_length) + "]");

  int oracle_length = 0;
  for (const auto& rule : rules)
    if (rule.kind == McRule::Kind::oracle) {
      oracle_length = oracle_select(oracle_spec(cfg, opts.model, max_length));
      break;
    }

  auto estimate_at = [&](const PanelDataset& ds, int ell) {
    if (opts.model == ModelKind::twfe) return estimate_twfe(ds, ell, opts.se_type);
    return record_at(estimate_modified_event_study(ds, ell, opts.se_type), *opts.target, ell);
  };

  McSummary out;
  out.replications = replications;
  out.max_length = max_length;
  out.true_value = mc_true_value(cfg, kind, opts);

  std::map<std::string, long> failures;
  for (const auto& rule : rules) failures[rule.name()] = 0;

  for (long r = 0; r < replications; ++r) {
    SimConfig rep_cfg = cfg;
    rep_cfg.seed = cfg.seed ^ splitmix64(static_cast<std::uint64_t>(r));
    PanelDataset ds = generate(kind, rep_cfg);

    for (const auto& rule : rules) {
      try {
        EstimateRecord rec;
        switch (rule.kind) {
          case McRule::Kind::fixed:
            rec = estimate_at(ds, rule.fixed_length);
            break;
          case McRule::Kind::oracle:
            rec = estimate_at(ds, oracle_length);
            break;
          case McRule::Kind::feasible_mse: {
            auto ests = build_estimates(ds, max_length, opts.model, opts.target, opts.se_type);
            auto sel = select(candidates_from_estimates(ests), ests);
            rec = sel.selected;
            break;
          }
        }
        out.records.push_back({r, rep_cfg.seed, rule.name(), rec.pre_length,
                               rec.coefficient, rec.se});
      } catch (const Error&) {
        failures[rule.name()] += 1;
      }
    }
  }

  for (const auto& rule : rules) {
    std::vector<const McRepRecord*> recs;
    for (const auto& rec : out.records)
      if (rec.rule == rule.name()) recs.push_back(&rec);
    out.rules.push_back(
        detail::summarize_rule(rule.name(), recs, failures[rule.name()], out.true_value));
  }
  return out;
}

inline void write_mc_summary_csv(const McSummary& s, std::ostream& out,
                                 const csv::Formatter& fmt = {}) {
  out << "rule,replications,failures,true_value,mean_coefficient,sd_coefficient,"
         "mean_se,bias,mse";
  for (int ell = 0; ell <= s.max_length; ++ell) out << ",sel_" << ell;
  out << '\n';
  for (const auto& r : s.rules) {
    out << r.rule << ',' << s.replications << ',' << r.n_failed << ','
        << fmt(s.true_value) << ',' << fmt(r.mean_coefficient) << ','
        << fmt(r.sd_coefficient) << ',' << fmt(r.mean_se) << ',' << fmt(r.bias) << ','
        << fmt(r.mse);
    for (int ell = 0; ell <= s.max_length; ++ell) {
      auto it = r.selection_counts.find(ell);
      out << ',' << (it == r.selection_counts.end() ? 0L : it->second);
    }
    out << '\n';
  }
}

inline void write_mc_replications_csv(const McSummary& s, std::ostream& out,
                                      const csv::Formatter& fmt = {}) {
  out << "replication,seed,rule,selected_length,coefficient,se\n";
  for (const auto& r : s.records)
    out << r.replication << ',' << r.seed << ',' << r.rule << ',' << r.selected_length
        << ',' << fmt(r.coefficient) << ',' << fmt(r.se) << '\n';
}

}  // namespace msedid
