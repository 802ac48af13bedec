// msedid: difference-in-differences estimation with MSE-based selection of
// the pre-trends window. Subcommands: simulate, select, estimate, plotdata,
// mc. Every run writes its outputs plus a manifest.json recording the
// command line, the effective config, the seed and the file list; the
// manifest is written last so its presence marks a complete run.
//
// Exit codes: 0 success, 2 input error (files, flags, config), 3
// estimation error (windows, collinearity, selection).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msedid/msedid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace msedid;

namespace {

struct GlobalArgs {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> t_star;
  std::string se = "iid";
  std::string output = ".";
  bool full_precision = false;
  std::string col_unit = "unit";
  std::string col_time = "time";
  std::string col_treated = "treated";
  std::string col_outcome = "outcome";
};

struct Ctx {
  GlobalArgs g;
  SimConfig cfg;          // config file + global flag overrides applied
  SeType se_type = SeType::iid;
  fs::path outdir;
  csv::Formatter fmt;
  std::string command_line;
};

std::string quote_join(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    std::string a = argv[i];
    if (a.find(' ') != std::string::npos) out += '"' + a + '"';
    else out += a;
  }
  return out;
}

SeType parse_se(const std::string& s) {
  if (s == "iid") return SeType::iid;
  if (s == "cluster") return SeType::cluster;
  throw ConfigError("unknown se type '" + s + "' (want iid or cluster)");
}

json config_snapshot(const SimConfig& c) {
  return json{{"mu_treated", c.mu_treated},
              {"mu_control", c.mu_control},
              {"slope_common", c.slope_common},
              {"slope_control_pre", c.slope_control_pre},
              {"effect", c.effect},
              {"noise_sd", c.noise_sd},
              {"n_per_group", c.n_per_group},
              {"t_min", c.t_min},
              {"t_max", c.t_max},
              {"t_star", c.t_star},
              {"seed", c.seed}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << text;
}

// Manifest goes last: a run is complete once it exists.
void write_manifest(const Ctx& ctx, json extra, const std::vector<std::string>& outputs) {
  json m{{"command_line", ctx.command_line},
         {"version", version()},
         {"seed", ctx.cfg.seed},
         {"config", config_snapshot(ctx.cfg)},
         {"se", se_type_name(ctx.se_type)},
         {"outputs", outputs}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_text(ctx.outdir / "manifest.json", m.dump(2) + "\n");
}

CsvSchema schema_of(const Ctx& ctx) {
  CsvSchema s;
  s.unit = ctx.g.col_unit;
  s.time = ctx.g.col_time;
  s.treated = ctx.g.col_treated;
  s.outcome = ctx.g.col_outcome;
  s.t_star = ctx.cfg.t_star;
  return s;
}

void write_group_means(const PanelDataset& ds, const fs::path& path,
                       const csv::Formatter& fmt) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << "time,treated_mean,control_mean\n";
  for (long p = 0; p < ds.n_periods(); ++p) {
    double sum_t = 0, sum_c = 0;
    long n_t = 0, n_c = 0;
    for (long u = 0; u < ds.n_units(); ++u) {
      if (!ds.has(u, p)) continue;
      if (ds.unit_treated(u)) { sum_t += ds.outcome(u, p); ++n_t; }
      else { sum_c += ds.outcome(u, p); ++n_c; }
    }
    out << ds.periods()[static_cast<size_t>(p)] << ','
        << (n_t ? fmt(sum_t / n_t) : std::string()) << ','
        << (n_c ? fmt(sum_c / n_c) : std::string()) << '\n';
  }
}

json record_json(const EstimateRecord& rec) {
  json j{{"model", model_kind_name(rec.kind)},
         {"pre_length", rec.pre_length},
         {"coefficient", rec.coefficient},
         {"se", rec.se},
         {"se_type", se_type_name(rec.se_type)},
         {"n_obs", rec.n_obs},
         {"df_resid", rec.df_resid}};
  if (rec.target) j["target"] = *rec.target;
  return j;
}

// True effect by relative event time for curve annotation: zero before
// onset, the DGP path from the onset period on.
std::map<int, double> truth_by_event_time(const SimConfig& cfg, DgpKind kind,
                                          const EventStudyCurve& curve) {
  std::map<int, double> out;
  for (const auto& pt : curve.points)
    out[pt.event_time] =
        pt.event_time >= 1 ? true_effect(cfg, kind, pt.event_time - 1) : 0.0;
  return out;
}

struct SimulateArgs {
  std::string kind;
  std::optional<double> mu_treated, mu_control, slope_common, slope_control_pre,
      effect, noise_sd;
  std::optional<int> n_per_group, t_min, t_max;
};

SimConfig simulate_config(const Ctx& ctx, const SimulateArgs& a, DgpKind kind) {
  SimConfig cfg = (kind == DgpKind::static_effect) ? static_config() : dynamic_config();
  if (ctx.g.config_path) cfg = load_config_file(*ctx.g.config_path, cfg);
  if (ctx.g.seed) cfg.seed = *ctx.g.seed;
  if (ctx.g.t_star) cfg.t_star = *ctx.g.t_star;
  if (a.mu_treated) cfg.mu_treated = *a.mu_treated;
  if (a.mu_control) cfg.mu_control = *a.mu_control;
  if (a.slope_common) cfg.slope_common = *a.slope_common;
  if (a.slope_control_pre) cfg.slope_control_pre = *a.slope_control_pre;
  if (a.effect) cfg.effect = *a.effect;
  if (a.noise_sd) cfg.noise_sd = *a.noise_sd;
  if (a.n_per_group) cfg.n_per_group = *a.n_per_group;
  if (a.t_min) cfg.t_min = *a.t_min;
  if (a.t_max) cfg.t_max = *a.t_max;
  validate_config(cfg);
  return cfg;
}

int run_simulate(Ctx& ctx, const SimulateArgs& a) {
  DgpKind kind = parse_dgp_kind(a.kind);
  ctx.cfg = simulate_config(ctx, a, kind);
  PanelDataset ds = generate(kind, ctx.cfg);

  write_long_csv(ds, (ctx.outdir / "dataset.csv").string(), schema_of(ctx));
  write_group_means(ds, ctx.outdir / "group_means.csv", ctx.fmt);
  write_manifest(ctx, json{{"subcommand", "simulate"}, {"kind", a.kind}},
                 {"dataset.csv", "group_means.csv"});
  return 0;
}

struct SelectArgs {
  std::string input;
  std::string model = "twfe";
  std::optional<int> target;
  std::optional<int> max_length;
  bool skip_failed = false;
};

int run_select(Ctx& ctx, const SelectArgs& a) {
  PanelDataset ds = load_long_csv(a.input, schema_of(ctx));
  ModelKind kind = parse_model_kind(a.model);
  const int max_len = a.max_length.value_or(max_pre_length(ds));
  BuildOptions opts;
  opts.skip_failures = a.skip_failed;

  auto estimates = build_estimates(ds, max_len, kind, a.target, ctx.se_type, opts);
  auto candidates = candidates_from_estimates(estimates);
  SelectionResult res = select(candidates, estimates);

  {
    std::ofstream out(ctx.outdir / "candidates.csv");
    write_candidates_csv(res.candidates, out, ctx.fmt);
  }
  {
    std::ofstream out(ctx.outdir / "diagnostics.csv");
    write_diagnostics_csv(res.candidates, out, ctx.fmt);
  }
  json sel = record_json(res.selected);
  sel["optimal_length"] = res.optimal_length;
  sel["mse"] = res.selected_mse;
  sel["candidates_file"] = "candidates.csv";
  write_text(ctx.outdir / "selected.json", sel.dump(2) + "\n");

  write_manifest(ctx,
                 json{{"subcommand", "select"},
                      {"input", a.input},
                      {"model", a.model},
                      {"max_length", max_len},
                      {"optimal_length", res.optimal_length}},
                 {"candidates.csv", "diagnostics.csv", "selected.json"});
  return 0;
}

struct EstimateArgs {
  std::string input;
  std::string model = "twfe";
  std::optional<int> pre_length;
  std::optional<int> target;
};

int run_estimate(Ctx& ctx, const EstimateArgs& a) {
  PanelDataset ds = load_long_csv(a.input, schema_of(ctx));
  ModelKind kind = parse_model_kind(a.model);
  std::vector<std::string> outputs;
  json extra{{"subcommand", "estimate"}, {"input", a.input}, {"model", a.model}};

  if (kind == ModelKind::twfe) {
    const int ell = a.pre_length.value_or(max_pre_length(ds));
    EstimateRecord rec = estimate_twfe(ds, ell, ctx.se_type);
    write_text(ctx.outdir / "estimate.json", record_json(rec).dump(2) + "\n");
    outputs.push_back("estimate.json");
  } else {
    EventStudyCurve curve;
    int ell = 0;
    if (kind == ModelKind::event_study) {
      PanelDataset w = a.pre_length ? truncate_pre_window(ds, *a.pre_length) : ds;
      ell = a.pre_length.value_or(max_pre_length(ds));
      curve = estimate_event_study(w, ctx.se_type);
    } else {
      ell = a.pre_length.value_or(max_pre_length(ds));
      curve = estimate_modified_event_study(ds, ell, ctx.se_type);
    }
    {
      std::ofstream out(ctx.outdir / "curve.csv");
      write_curve_csv(curve, out, ctx.fmt);
    }
    outputs.push_back("curve.csv");
    if (a.target) {
      EstimateRecord rec = record_at(curve, *a.target, ell);
      write_text(ctx.outdir / "estimate.json", record_json(rec).dump(2) + "\n");
      outputs.push_back("estimate.json");
    }
  }
  write_manifest(ctx, extra, outputs);
  return 0;
}

struct PlotdataArgs {
  std::string input;
  std::string model = "event_study";
  std::optional<int> pre_length;
  std::optional<int> target;
  std::optional<std::string> truth_kind;
};

int run_plotdata(Ctx& ctx, const PlotdataArgs& a) {
  PanelDataset ds = load_long_csv(a.input, schema_of(ctx));
  std::vector<std::string> outputs;
  json extra{{"subcommand", "plotdata"}, {"input", a.input}, {"model", a.model}};

  EventStudyCurve curve;
  if (a.model == "event_study") {
    PanelDataset w = a.pre_length ? truncate_pre_window(ds, *a.pre_length) : ds;
    curve = estimate_event_study(w, ctx.se_type);
  } else if (a.model == "modified_event_study") {
    curve = estimate_modified_event_study(ds, a.pre_length.value_or(max_pre_length(ds)),
                                          ctx.se_type);
  } else if (a.model == "mse_optimal") {
    if (!a.target)
      throw ConfigError("mse_optimal needs --target (event time whose mse is minimized)");
    const int max_len = a.pre_length.value_or(max_pre_length(ds));
    auto estimates = build_estimates(ds, max_len, ModelKind::modified_event_study,
                                     a.target, ctx.se_type);
    auto candidates = candidates_from_estimates(estimates);
    SelectionResult res = select(candidates, estimates);
    curve = estimate_modified_event_study(ds, res.optimal_length, ctx.se_type);
    {
      std::ofstream out(ctx.outdir / "selection.csv");
      write_candidates_csv(res.candidates, out, ctx.fmt);
    }
    outputs.push_back("selection.csv");
    extra["optimal_length"] = res.optimal_length;
  } else {
    throw ConfigError("unknown plotdata model '" + a.model +
                      "' (want event_study, modified_event_study or mse_optimal)");
  }

  std::optional<std::map<int, double>> truth;
  if (a.truth_kind) {
    DgpKind kind = parse_dgp_kind(*a.truth_kind);
    SimulateArgs none;
    none.kind = *a.truth_kind;
    ctx.cfg = simulate_config(ctx, none, kind);  // kind defaults, then config/flags
    truth = truth_by_event_time(ctx.cfg, kind, curve);
    extra["truth_kind"] = *a.truth_kind;
  }
  {
    std::ofstream out(ctx.outdir / "curve.csv");
    write_curve_csv(curve, out, ctx.fmt, truth ? &*truth : nullptr);
  }
  outputs.insert(outputs.begin(), "curve.csv");
  write_manifest(ctx, extra, outputs);
  return 0;
}

struct McArgs {
  std::string kind;
  long replications = 100;
  std::string rules = "feasible_mse";
  std::string model = "twfe";
  std::optional<int> target;
  std::optional<int> max_length;
};

int run_mc(Ctx& ctx, const McArgs& a) {
  DgpKind kind = parse_dgp_kind(a.kind);
  SimulateArgs none;
  none.kind = a.kind;
  ctx.cfg = simulate_config(ctx, none, kind);

  std::vector<McRule> rules;
  std::stringstream ss(a.rules);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!std::string(csv::trim(tok)).empty()) rules.push_back(McRule::parse(std::string(csv::trim(tok))));

  McOptions opts;
  opts.model = parse_model_kind(a.model);
  opts.target = a.target;
  opts.se_type = ctx.se_type;
  opts.max_length = a.max_length;

  McSummary summary = monte_carlo(ctx.cfg, kind, a.replications, rules, opts);

  {
    std::ofstream out(ctx.outdir / "mc_summary.csv");
    write_mc_summary_csv(summary, out, ctx.fmt);
  }
  {
    std::ofstream out(ctx.outdir / "mc_replications.csv");
    write_mc_replications_csv(summary, out, ctx.fmt);
  }
  write_manifest(ctx,
                 json{{"subcommand", "mc"},
                      {"kind", a.kind},
                      {"replications", a.replications},
                      {"rules", a.rules},
                      {"model", a.model},
                      {"true_value", summary.true_value}},
                 {"mc_summary.csv", "mc_replications.csv"});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"difference-in-differences with MSE-based pre-trends window selection"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "key=value config file (SimConfig field names)");
  app.add_option("--seed", g.seed, "RNG seed (overrides config file)");
  app.add_option("--t-star", g.t_star, "reference period t* (default -1)");
  app.add_option("--se", g.se, "standard errors: iid or cluster (default iid)");
  app.add_option("--output", g.output, "output directory (default .)");
  app.add_flag("--full-precision", g.full_precision, "print doubles with full precision");
  app.add_option("--col-unit", g.col_unit, "unit id column name");
  app.add_option("--col-time", g.col_time, "time column name");
  app.add_option("--col-treated", g.col_treated, "treated flag column name");
  app.add_option("--col-outcome", g.col_outcome, "outcome column name");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic panel");
  sim->fallthrough();
  sim->add_option("--kind", sim_args.kind, "static or dynamic")->required();
  sim->add_option("--mu-treated", sim_args.mu_treated, "treated group level");
  sim->add_option("--mu-control", sim_args.mu_control, "control group level");
  sim->add_option("--slope-common", sim_args.slope_common, "common trend slope");
  sim->add_option("--slope-control-pre", sim_args.slope_control_pre,
                  "control pre-period trend slope");
  sim->add_option("--effect", sim_args.effect, "effect level (static) or per-period slope (dynamic)");
  sim->add_option("--noise-sd", sim_args.noise_sd, "noise standard deviation");
  sim->add_option("--n-per-group", sim_args.n_per_group, "units per group");
  sim->add_option("--t-min", sim_args.t_min, "first period");
  sim->add_option("--t-max", sim_args.t_max, "last period");

  SelectArgs sel_args;
  auto* sel = app.add_subcommand("select", "scan pre-trends windows and pick the min-mse one");
  sel->fallthrough();
  sel->add_option("--input", sel_args.input, "long-format panel CSV")->required();
  sel->add_option("--model", sel_args.model, "twfe or modified_event_study (default twfe)");
  sel->add_option("--target", sel_args.target, "event time to track (modified_event_study)");
  sel->add_option("--max-length", sel_args.max_length, "longest window to scan (default: all)");
  sel->add_flag("--skip-failed-lengths", sel_args.skip_failed,
                "skip windows whose estimation fails instead of aborting");

  EstimateArgs est_args;
  auto* est = app.add_subcommand("estimate", "fit one model at one window length");
  est->fallthrough();
  est->add_option("--input", est_args.input, "long-format panel CSV")->required();
  est->add_option("--model", est_args.model,
                  "twfe, event_study or modified_event_study (default twfe)");
  est->add_option("--pre-length", est_args.pre_length,
                  "pre-trends window length (default: all available)");
  est->add_option("--target", est_args.target,
                  "also emit the scalar record at this event time");

  PlotdataArgs plot_args;
  auto* plot = app.add_subcommand("plotdata", "emit an event-study curve as CSV");
  plot->fallthrough();
  plot->add_option("--input", plot_args.input, "long-format panel CSV")->required();
  plot->add_option("--model", plot_args.model,
                   "event_study, modified_event_study or mse_optimal");
  plot->add_option("--pre-length", plot_args.pre_length,
                   "window length (or scan cap for mse_optimal)");
  plot->add_option("--target", plot_args.target, "target event time (mse_optimal)");
  plot->add_option("--truth-kind", plot_args.truth_kind,
                   "add true_value column for this DGP (static or dynamic)");

  McArgs mc_args;
  auto* mc = app.add_subcommand("mc", "Monte Carlo comparison of selection rules");
  mc->fallthrough();
  mc->add_option("--kind", mc_args.kind, "static or dynamic")->required();
  mc->add_option("--replications,-R", mc_args.replications, "number of replications");
  mc->add_option("--rules", mc_args.rules,
                 "comma list of feasible_mse, oracle, fixed(N) (default feasible_mse)");
  mc->add_option("--model", mc_args.model, "twfe or modified_event_study");
  mc->add_option("--target", mc_args.target, "event time to track (modified_event_study)");
  mc->add_option("--max-length", mc_args.max_length, "longest window to scan");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Ctx ctx;
    ctx.g = g;
    ctx.se_type = parse_se(g.se);
    ctx.fmt.full_precision = g.full_precision;
    ctx.command_line = quote_join(argc, argv);
    ctx.outdir = g.output;
    std::error_code ec;
    fs::create_directories(ctx.outdir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + g.output + "'");

    // Non-simulation commands still honor --config/--seed/--t-star so a
    // dataset's generating config can ride along (t* in particular).
    ctx.cfg = SimConfig{};
    if (g.config_path) ctx.cfg = load_config_file(*g.config_path, ctx.cfg);
    if (g.seed) ctx.cfg.seed = *g.seed;
    if (g.t_star) ctx.cfg.t_star = *g.t_star;

    if (*sim) return run_simulate(ctx, sim_args);
    if (*sel) return run_select(ctx, sel_args);
    if (*est) return run_estimate(ctx, est_args);
    if (*plot) return run_plotdata(ctx, plot_args);
    if (*mc) return run_mc(ctx, mc_args);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.category() == ErrorCategory::input ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
