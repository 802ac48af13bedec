#pragma once

// Difference-in-differences estimators on a PanelDataset: the two-way
// fixed-effects average effect, the conventional event study (dummies for
// every period except the reference t*), and a modified event study that
// keeps dummies only for post periods so the omitted category pools the
// whole pre window. Closed-form twins of the event-study coefficients are
// provided for testing and for fast window scans; they agree with the
// regressions to solver precision on balanced panels.

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "msedid/csv.hpp"
#include "msedid/errors.hpp"
#include "msedid/fe_ols.hpp"
#include "msedid/panel.hpp"

namespace msedid {

enum class ModelKind { twfe, event_study, modified_event_study };

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::twfe: return "twfe";
    case ModelKind::event_study: return "event_study";
    case ModelKind::modified_event_study: return "modified_event_study";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "twfe") return ModelKind::twfe;
  if (s == "event_study") return ModelKind::event_study;
  if (s == "modified_event_study") return ModelKind::modified_event_study;
  throw ConfigError("unknown model '" + s +
                    "' (want twfe, event_study or modified_event_study)");
}

// One scalar estimate, tagged with the window length it came from and, for
// event-study models, the event time it belongs to.
struct EstimateRecord {
  ModelKind kind = ModelKind::twfe;
  int pre_length = 0;
  std::optional<int> target;
  double coefficient = 0.0;
  double se = 0.0;
  long n_obs = 0;
  long df_resid = 0;
  SeType se_type = SeType::iid;
};

struct CurvePoint {
  int event_time = 0;  // relative to t*, never 0
  double coefficient = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct EventStudyCurve {
  ModelKind kind = ModelKind::event_study;
  int reference_time = 0;  // t* in calendar time
  double confidence = 0.95;
  long n_obs = 0;
  long df_resid = 0;
  SeType se_type = SeType::iid;
  std::vector<CurvePoint> points;  // ascending event time
};

inline double t_critical(long df, double confidence = 0.95) {
  if (df < 1) throw FitError("t critical value needs df >= 1, got " + std::to_string(df));
  boost::math::students_t dist(static_cast<double>(df));
  return boost::math::quantile(dist, 0.5 * (1.0 + confidence));
}

namespace detail {

inline std::string event_name(int rel) { return "ev_" + std::to_string(rel); }

// Shared design assembly. Dummies are treatment-group interactions: the
// column for event time r is 1 only for treated units observed at t* + r.
// rel_times empty means the single pooled treated-post indicator.
inline DesignSpec build_design(const PanelDataset& ds, const std::vector<int>& rel_times) {
  DesignSpec d;
  const long n = ds.n_obs();
  const long k = rel_times.empty() ? 1 : static_cast<long>(rel_times.size());
  d.outcome.resize(n);
  d.regressors = Eigen::MatrixXd::Zero(n, k);
  d.unit_index.resize(static_cast<size_t>(n));
  d.time_index.resize(static_cast<size_t>(n));
  if (rel_times.empty()) {
    d.names = {"treated_post"};
  } else {
    d.names.reserve(rel_times.size());
    for (int r : rel_times) d.names.push_back(event_name(r));
  }

  std::map<int, long> col_of;
  for (size_t j = 0; j < rel_times.size(); ++j) col_of[rel_times[j]] = static_cast<long>(j);

  long row = 0;
  for (long u = 0; u < ds.n_units(); ++u) {
    const bool treated = ds.unit_treated(u);
    for (long p = 0; p < ds.n_periods(); ++p) {
      if (!ds.has(u, p)) continue;
      const int t = ds.periods()[static_cast<size_t>(p)];
      d.outcome(row) = ds.outcome(u, p);
      d.unit_index[static_cast<size_t>(row)] = static_cast<int>(u);
      d.time_index[static_cast<size_t>(row)] = t;
      if (treated) {
        if (rel_times.empty()) {
          if (t > ds.t_star()) d.regressors(row, 0) = 1.0;
        } else {
          auto it = col_of.find(t - ds.t_star());
          if (it != col_of.end()) d.regressors(row, it->second) = 1.0;
        }
      }
      ++row;
    }
  }
  return d;
}

inline std::vector<int> event_times(const PanelDataset& ds, bool post_only) {
  std::vector<int> rel;
  for (int t : ds.periods()) {
    const int r = t - ds.t_star();
    if (r == 0) continue;
    if (post_only && r < 0) continue;
    rel.push_back(r);
  }
  return rel;
}

inline EventStudyCurve curve_from_fit(const PanelDataset& w, ModelKind kind,
                                      const std::vector<int>& rel_times,
                                      const FitResult& fit, double confidence) {
  EventStudyCurve c;
  c.kind = kind;
  c.reference_time = w.t_star();
  c.confidence = confidence;
  c.n_obs = fit.n_obs;
  c.df_resid = fit.df_resid;
  c.se_type = fit.se_type;
  const double tcrit = t_critical(fit.df_resid, confidence);
  for (int r : rel_times) {
    CurvePoint pt;
    pt.event_time = r;
    pt.coefficient = coefficient(fit, event_name(r));
    pt.se = coefficient_se(fit, event_name(r));
    pt.ci_low = pt.coefficient - tcrit * pt.se;
    pt.ci_high = pt.coefficient + tcrit * pt.se;
    c.points.push_back(pt);
  }
  return c;
}

inline void require_balanced(const PanelDataset& ds, const char* what) {
  auto rep = validate(ds);
  if (!rep.is_balanced)
    throw EstimationError(std::string(what) + " requires a balanced panel; first missing cell: unit '" +
                          rep.missing_cells.front().first + "' at time " +
                          std::to_string(rep.missing_cells.front().second));
}

}  // namespace detail

// Pooled average effect: outcome on a single treated-x-post indicator with
// unit and period effects absorbed, using the window [t* - ell, t_max].
inline EstimateRecord estimate_twfe(const PanelDataset& ds, int ell,
                                    SeType se_type = SeType::iid) {
  PanelDataset w = truncate_pre_window(ds, ell);
  DesignSpec d = detail::build_design(w, {});
  FitResult f = fit(d, se_type);
  EstimateRecord rec;
  rec.kind = ModelKind::twfe;
  rec.pre_length = ell;
  rec.coefficient = coefficient(f, "treated_post");
  rec.se = coefficient_se(f, "treated_post");
  rec.n_obs = f.n_obs;
  rec.df_resid = f.df_resid;
  rec.se_type = se_type;
  return rec;
}

// Conventional event study on the dataset as given: one treated-group dummy
// per period except the reference t*.
inline EventStudyCurve estimate_event_study(const PanelDataset& ds,
                                            SeType se_type = SeType::iid,
                                            double confidence = 0.95) {
  auto rel = detail::event_times(ds, false);
  DesignSpec d = detail::build_design(ds, rel);
  FitResult f = fit(d, se_type);
  return detail::curve_from_fit(ds, ModelKind::event_study, rel, f, confidence);
}

// Modified event study on the window [t* - ell, t_max]: dummies only for
// post periods, so every pre period joins the omitted category.
inline EventStudyCurve estimate_modified_event_study(const PanelDataset& ds, int ell,
                                                     SeType se_type = SeType::iid,
                                                     double confidence = 0.95) {
  PanelDataset w = truncate_pre_window(ds, ell);
  auto rel = detail::event_times(w, true);
  DesignSpec d = detail::build_design(w, rel);
  FitResult f = fit(d, se_type);
  return detail::curve_from_fit(w, ModelKind::modified_event_study, rel, f, confidence);
}

// Event-study coefficient at event time l without the regression: the
// treated-vs-control difference of mean outcome changes from t* to t* + l.
inline double closed_form_event_study(const PanelDataset& ds, int l) {
  if (l == 0) throw EstimationError("event time 0 is the reference and has no coefficient");
  detail::require_balanced(ds, "closed-form event study");
  const int p_ref = ds.period_index(ds.t_star());
  const int p_l = ds.period_index(ds.t_star() + l);
  if (p_l < 0)
    throw EstimationError("period " + std::to_string(ds.t_star() + l) +
                          " (event time " + std::to_string(l) + ") not in panel");
  double sum_t = 0.0, sum_c = 0.0;
  for (long u = 0; u < ds.n_units(); ++u) {
    const double diff = ds.outcome(u, p_l) - ds.outcome(u, p_ref);
    (ds.unit_treated(u) ? sum_t : sum_c) += diff;
  }
  return sum_t / static_cast<double>(ds.n_treated_units()) -
         sum_c / static_cast<double>(ds.n_control_units());
}

// Modified-model coefficient at post event time l for window length ell:
// same contrast but against each unit's average outcome over [t* - ell, t*].
inline double closed_form_modified(const PanelDataset& ds, int l, int ell) {
  if (l < 1) throw EstimationError("modified model has coefficients only for event time >= 1");
  PanelDataset w = truncate_pre_window(ds, ell);
  detail::require_balanced(w, "closed-form modified event study");
  const int p_l = w.period_index(w.t_star() + l);
  if (p_l < 0)
    throw EstimationError("period " + std::to_string(w.t_star() + l) +
                          " (event time " + std::to_string(l) + ") not in panel");
  std::vector<int> pre_idx;
  for (long p = 0; p < w.n_periods(); ++p)
    if (w.periods()[static_cast<size_t>(p)] <= w.t_star()) pre_idx.push_back(static_cast<int>(p));

  double sum_t = 0.0, sum_c = 0.0;
  for (long u = 0; u < w.n_units(); ++u) {
    double pre = 0.0;
    for (int p : pre_idx) pre += w.outcome(u, p);
    pre /= static_cast<double>(pre_idx.size());
    const double diff = w.outcome(u, p_l) - pre;
    (w.unit_treated(u) ? sum_t : sum_c) += diff;
  }
  return sum_t / static_cast<double>(w.n_treated_units()) -
         sum_c / static_cast<double>(w.n_control_units());
}

// Plain 2x2 difference in differences; requires exactly two periods.
inline double att_2x2(const PanelDataset& ds) {
  if (ds.n_periods() != 2)
    throw EstimationError("2x2 estimator needs exactly 2 periods, got " +
                          std::to_string(ds.n_periods()));
  detail::require_balanced(ds, "2x2 estimator");
  double sum_t = 0.0, sum_c = 0.0;
  for (long u = 0; u < ds.n_units(); ++u) {
    const double diff = ds.outcome(u, 1) - ds.outcome(u, 0);
    (ds.unit_treated(u) ? sum_t : sum_c) += diff;
  }
  return sum_t / static_cast<double>(ds.n_treated_units()) -
         sum_c / static_cast<double>(ds.n_control_units());
}

// Scalar record for one event time of a fitted curve.
inline EstimateRecord record_at(const EventStudyCurve& curve, int target, int pre_length) {
  for (const auto& pt : curve.points) {
    if (pt.event_time == target) {
      EstimateRecord rec;
      rec.kind = curve.kind;
      rec.pre_length = pre_length;
      rec.target = target;
      rec.coefficient = pt.coefficient;
      rec.se = pt.se;
      rec.n_obs = curve.n_obs;
      rec.df_resid = curve.df_resid;
      rec.se_type = curve.se_type;
      return rec;
    }
  }
  throw EstimationError("target event time " + std::to_string(target) +
                        " has no coefficient in the fitted curve");
}

inline void write_curve_csv(const EventStudyCurve& c, std::ostream& out,
                            const csv::Formatter& fmt = {},
                            const std::map<int, double>* true_values = nullptr) {
  out << "event_time,coefficient,se,ci_low,ci_high";
  if (true_values) out << ",true_value";
  out << '\n';
  for (const auto& pt : c.points) {
    out << pt.event_time << ',' << fmt(pt.coefficient) << ',' << fmt(pt.se) << ','
        << fmt(pt.ci_low) << ',' << fmt(pt.ci_high);
    if (true_values) {
      auto it = true_values->find(pt.event_time);
      out << ',' << (it == true_values->end() ? "" : fmt(it->second));
    }
    out << '\n';
  }
}

}  // namespace msedid
