#pragma once

// Pre-trends window selection. For each candidate length ell the scan
// re-estimates the model on [t* - ell, t_max]; the ell = 0 fit (no extra
// pre periods beyond the reference) serves as the low-bias benchmark.
// Estimated mse(ell) = (coef(ell) - coef(0))^2 + se(ell)^2 and the smallest
// mse wins, ties going to the shorter window. An oracle variant computes
// mse from known trend-gap and sampling-variance inputs instead.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "msedid/csv.hpp"
#include "msedid/errors.hpp"
#include "msedid/estimators.hpp"
#include "msedid/panel.hpp"

namespace msedid {

struct MseCandidate {
  int pre_length = 0;
  double coefficient = 0.0;
  double se = 0.0;
  double bias = 0.0;  // coefficient(ell) - coefficient(0)
  double bias_sq = 0.0;
  double variance = 0.0;
  double mse = 0.0;
};

struct SelectionResult {
  std::vector<MseCandidate> candidates;
  EstimateRecord selected;
  int optimal_length = 0;
  double selected_mse = 0.0;
};

struct BuildOptions {
  // Skip window lengths whose estimation fails instead of aborting. The
  // benchmark length 0 can never be skipped.
  bool skip_failures = false;
};

namespace detail {

// Runs est(ell) for ell = 0..max_length. Kept as a seam so failure
// handling is testable with an injected estimator.
template <class EstimateFn>
std::vector<EstimateRecord> collect_window_estimates(EstimateFn&& est, int max_length,
                                                     bool skip_failures) {
  std::vector<EstimateRecord> out;
  for (int ell = 0; ell <= max_length; ++ell) {
    try {
      out.push_back(est(ell));
    } catch (const Error& e) {
      if (!skip_failures || ell == 0)
        throw SelectionError("estimation failed at pre-trends length " +
                             std::to_string(ell) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace detail

// Scalar estimates for every window length 0..max_length.
inline std::vector<EstimateRecord> build_estimates(const PanelDataset& ds, int max_length,
                                                   ModelKind kind,
                                                   std::optional<int> target = std::nullopt,
                                                   SeType se_type = SeType::iid,
                                                   const BuildOptions& opts = {}) {
  if (max_length < 0)
    throw WindowError("maximum pre-trends length must be non-negative, got " +
                      std::to_string(max_length));
  if (max_length > max_pre_length(ds))
    throw WindowError("maximum pre-trends length " + std::to_string(max_length) +
                      " exceeds feasible length " + std::to_string(max_pre_length(ds)));
  if (kind == ModelKind::event_study)
    throw SelectionError("event_study keeps all pre dummies and does not scan windows; "
                         "use modified_event_study");
  if (kind == ModelKind::modified_event_study && !target)
    throw SelectionError("modified_event_study scan needs a target event time");

  return detail::collect_window_estimates(
      [&](int ell) {
        if (kind == ModelKind::twfe) return estimate_twfe(ds, ell, se_type);
        return record_at(estimate_modified_event_study(ds, ell, se_type), *target, ell);
      },
      max_length, opts.skip_failures);
}

// MSE decomposition against the length-0 benchmark. Records must carry
// unique lengths including 0; they are returned in ascending length order.
inline std::vector<MseCandidate> candidates_from_estimates(
    const std::vector<EstimateRecord>& records) {
  if (records.empty()) throw SelectionError("no estimates to build candidates from");

  std::vector<const EstimateRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const EstimateRecord* a, const EstimateRecord* b) {
              return a->pre_length < b->pre_length;
            });
  for (size_t i = 1; i < ordered.size(); ++i)
    if (ordered[i]->pre_length == ordered[i - 1]->pre_length)
      throw SelectionError("duplicate pre-trends length " +
                           std::to_string(ordered[i]->pre_length));
  if (ordered.front()->pre_length != 0)
    throw SelectionError("benchmark estimate at pre-trends length 0 is missing");

  const double coef0 = ordered.front()->coefficient;
  std::vector<MseCandidate> out;
  out.reserve(ordered.size());
  for (const auto* r : ordered) {
    MseCandidate c;
    c.pre_length = r->pre_length;
    c.coefficient = r->coefficient;
    c.se = r->se;
    c.bias = r->coefficient - coef0;
    c.bias_sq = c.bias * c.bias;
    c.variance = r->se * r->se;
    c.mse = c.bias_sq + c.variance;
    out.push_back(c);
  }
  return out;
}

inline std::vector<MseCandidate> build_candidates(const PanelDataset& ds, int max_length,
                                                  ModelKind kind,
                                                  std::optional<int> target = std::nullopt,
                                                  SeType se_type = SeType::iid,
                                                  const BuildOptions& opts = {}) {
  return candidates_from_estimates(build_estimates(ds, max_length, kind, target, se_type, opts));
}

// Smallest estimated mse wins; exact ties go to the shorter window, so the
// result does not depend on input order.
inline SelectionResult select(const std::vector<MseCandidate>& candidates,
                              const std::vector<EstimateRecord>& estimates) {
  if (candidates.empty()) throw SelectionError("no candidates to select from");
  if (candidates.size() != estimates.size())
    throw SelectionError("candidate and estimate lists have different lengths");

  size_t best = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!std::isfinite(c.mse))
      throw SelectionError("non-finite mse at pre-trends length " +
                           std::to_string(c.pre_length));
    if (c.mse < candidates[best].mse ||
        (c.mse == candidates[best].mse && c.pre_length < candidates[best].pre_length))
      best = i;
  }

  const EstimateRecord* rec = nullptr;
  for (const auto& e : estimates)
    if (e.pre_length == candidates[best].pre_length) rec = &e;
  if (!rec)
    throw SelectionError("no estimate record for selected pre-trends length " +
                         std::to_string(candidates[best].pre_length));

  SelectionResult res;
  res.candidates = candidates;
  res.selected = *rec;
  res.optimal_length = candidates[best].pre_length;
  res.selected_mse = candidates[best].mse;
  return res;
}

// Diagnostic mse with the benchmark's sampling noise removed from the
// squared-bias term: length 0 keeps its variance, longer windows use
// max(bias^2 - variance(0), 0) + variance(ell).
inline std::vector<double> debiased_mse(const std::vector<MseCandidate>& candidates) {
  const MseCandidate* base = nullptr;
  for (const auto& c : candidates)
    if (c.pre_length == 0) base = &c;
  if (!base) throw SelectionError("benchmark candidate at pre-trends length 0 is missing");

  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.pre_length == 0)
      out.push_back(c.variance);
    else
      out.push_back(std::max(c.bias_sq - base->variance, 0.0) + c.variance);
  }
  return out;
}

// Known-inputs version of the rule: a linear pre-trend gap gamma biases the
// length-ell estimate by gamma * ell / (ell + ell_post).
struct OracleSpec {
  double gamma = 0.0;
  int ell_post = 1;
  std::map<int, double> variances;  // length -> sampling variance
};

inline double oracle_mse(const OracleSpec& spec, int ell) {
  if (spec.ell_post < 1)
    throw SelectionError("oracle needs at least one post period, got " +
                         std::to_string(spec.ell_post));
  if (ell < 0) throw SelectionError("negative pre-trends length " + std::to_string(ell));
  auto it = spec.variances.find(ell);
  if (it == spec.variances.end())
    throw SelectionError("oracle has no variance for pre-trends length " +
                         std::to_string(ell));
  if (!std::isfinite(it->second) || it->second < 0.0)
    throw SelectionError("oracle variance at pre-trends length " + std::to_string(ell) +
                         " is not a finite non-negative number");
  const double bias = spec.gamma * static_cast<double>(ell) /
                      static_cast<double>(ell + spec.ell_post);
  return bias * bias + it->second;
}

inline int oracle_select(const OracleSpec& spec) {
  if (spec.variances.empty())
    throw SelectionError("oracle has no candidate lengths");
  bool have = false;
  int best_ell = 0;
  double best_mse = 0.0;
  for (const auto& [ell, var] : spec.variances) {
    (void)var;
    const double m = oracle_mse(spec, ell);
    if (!have || m < best_mse) {  // map iterates lengths ascending, ties keep the shorter
      have = true;
      best_ell = ell;
      best_mse = m;
    }
  }
  return best_ell;
}

inline void write_candidates_csv(const std::vector<MseCandidate>& candidates,
                                 std::ostream& out, const csv::Formatter& fmt = {}) {
  out << "length,mse,bias_squared,variance,coefficient,se\n";
  for (const auto& c : candidates)
    out << c.pre_length << ',' << fmt(c.mse) << ',' << fmt(c.bias_sq) << ','
        << fmt(c.variance) << ',' << fmt(c.coefficient) << ',' << fmt(c.se) << '\n';
}

inline void write_diagnostics_csv(const std::vector<MseCandidate>& candidates,
                                  std::ostream& out, const csv::Formatter& fmt = {}) {
  auto diag = debiased_mse(candidates);
  out << "length,mse_debiased\n";
  for (size_t i = 0; i < candidates.size(); ++i)
    out << candidates[i].pre_length << ',' << fmt(diag[i]) << '\n';
}

}  // namespace msedid
