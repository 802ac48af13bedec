#pragma once

// OLS with absorbed unit and time fixed effects. Both effects are removed
// by alternating within-transformations on [y | X]; for a balanced panel a
// single unit-then-time pass is exact and the loop stops after verifying
// the next sweep changes nothing. The slope estimates match OLS on the full
// dummy-variable expansion up to solver round-off.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "msedid/errors.hpp"

namespace msedid {

enum class SeType { iid, cluster };

inline const char* se_type_name(SeType t) { return t == SeType::iid ? "iid" : "cluster"; }

// Regression inputs after the caller has built outcome and regressor
// columns. unit_index/time_index carry arbitrary integer codes; only
// equality matters.
struct DesignSpec {
  Eigen::VectorXd outcome;
  Eigen::MatrixXd regressors;
  std::vector<std::string> names;
  std::vector<int> unit_index;
  std::vector<int> time_index;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // NaN-filled when se_available is false
  SeType se_type = SeType::iid;
  long n_obs = 0;
  long df_resid = 0;  // n - #units - #periods + 1 - #regressors
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  bool se_available = false;
  int sweeps = 0;
};

namespace detail {

inline constexpr double kDemeanTol = 1e-10;
inline constexpr int kMaxDemeanSweeps = 1000;
inline constexpr double kRcondMin = 1e-10;

// Recode arbitrary integer labels to 0..L-1 in first-appearance order.
inline std::vector<int> dense_codes(const std::vector<int>& raw, int* n_levels) {
  std::unordered_map<int, int> lookup;
  std::vector<int> codes(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    auto [it, inserted] = lookup.emplace(raw[i], static_cast<int>(lookup.size()));
    codes[i] = it->second;
  }
  *n_levels = static_cast<int>(lookup.size());
  return codes;
}

// In-place alternating demeaning of every column of M. Returns the number
// of sweeps run; converged when no cell moved by kDemeanTol or more.
inline int two_way_demean(Eigen::MatrixXd& M, const std::vector<int>& unit_code,
                          int n_units, const std::vector<int>& time_code,
                          int n_times) {
  const long n = M.rows();
  const long m = M.cols();
  Eigen::MatrixXd usum(n_units, m), tsum(n_times, m);
  Eigen::VectorXd ucnt = Eigen::VectorXd::Zero(n_units);
  Eigen::VectorXd tcnt = Eigen::VectorXd::Zero(n_times);
  for (long i = 0; i < n; ++i) {
    ucnt(unit_code[static_cast<size_t>(i)]) += 1.0;
    tcnt(time_code[static_cast<size_t>(i)]) += 1.0;
  }

  Eigen::MatrixXd before;
  for (int sweep = 1; sweep <= kMaxDemeanSweeps; ++sweep) {
    before = M;
    usum.setZero();
    for (long i = 0; i < n; ++i) usum.row(unit_code[static_cast<size_t>(i)]) += M.row(i);
    for (long i = 0; i < n; ++i) {
      const int u = unit_code[static_cast<size_t>(i)];
      M.row(i) -= usum.row(u) / ucnt(u);
    }
    tsum.setZero();
    for (long i = 0; i < n; ++i) tsum.row(time_code[static_cast<size_t>(i)]) += M.row(i);
    for (long i = 0; i < n; ++i) {
      const int t = time_code[static_cast<size_t>(i)];
      M.row(i) -= tsum.row(t) / tcnt(t);
    }
    if ((M - before).cwiseAbs().maxCoeff() < kDemeanTol) return sweep;
  }
  throw FitError("two-way demeaning did not converge after " +
                 std::to_string(kMaxDemeanSweeps) + " sweeps");
}

inline void check_design(const DesignSpec& d) {
  const long n = d.outcome.size();
  const long k = d.regressors.cols();
  if (n < 1) throw FitError("design has no rows");
  if (k < 1) throw FitError("design has no regressors");
  if (d.regressors.rows() != n)
    throw FitError("regressor matrix has " + std::to_string(d.regressors.rows()) +
                   " rows, outcome has " + std::to_string(n));
  if (static_cast<long>(d.names.size()) != k)
    throw FitError("expected " + std::to_string(k) + " regressor names, got " +
                   std::to_string(d.names.size()));
  if (static_cast<long>(d.unit_index.size()) != n ||
      static_cast<long>(d.time_index.size()) != n)
    throw FitError("unit/time index length does not match outcome length");
  std::set<std::string> seen;
  for (const auto& nm : d.names)
    if (!seen.insert(nm).second) throw FitError("duplicate regressor name '" + nm + "'");
}

}  // namespace detail

// Covariance clustered by unit: bread * (sum_g s_g s_g') * bread with the
// usual G/(G-1) * (N-1)/df small-sample factor. residuals must come from the
// fit that produced bread = (X~'X~)^{-1}.
inline Eigen::MatrixXd cluster_robust_covariance(const DesignSpec& design,
                                                 const Eigen::VectorXd& residuals,
                                                 const Eigen::MatrixXd& bread) {
  detail::check_design(design);
  const long n = design.outcome.size();
  const long k = design.regressors.cols();
  if (residuals.size() != n)
    throw FitError("residual vector length does not match design");
  if (bread.rows() != k || bread.cols() != k)
    throw FitError("bread matrix has wrong dimensions");

  int n_units = 0, n_times = 0;
  auto ucode = detail::dense_codes(design.unit_index, &n_units);
  auto tcode = detail::dense_codes(design.time_index, &n_times);
  if (n_units < 2)
    throw FitError("cluster-robust covariance needs at least 2 clusters, got " +
                   std::to_string(n_units));
  const long df = n - n_units - n_times + 1 - k;
  if (df < 1)
    throw SeUnavailableError("cluster-robust covariance undefined: residual degrees of freedom is " +
                             std::to_string(df));

  Eigen::MatrixXd X = design.regressors;
  detail::two_way_demean(X, ucode, n_units, tcode, n_times);

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_units, k);
  for (long i = 0; i < n; ++i)
    scores.row(ucode[static_cast<size_t>(i)]) += residuals(i) * X.row(i);
  Eigen::MatrixXd meat = scores.transpose() * scores;

  const double g = static_cast<double>(n_units);
  const double factor = g / (g - 1.0) * (static_cast<double>(n - 1) / static_cast<double>(df));
  Eigen::MatrixXd cov = factor * bread * meat * bread;
  return 0.5 * (cov + cov.transpose());
}

inline FitResult fit(const DesignSpec& design, SeType se_type = SeType::iid) {
  detail::check_design(design);
  const long n = design.outcome.size();
  const long k = design.regressors.cols();

  int n_units = 0, n_times = 0;
  auto ucode = detail::dense_codes(design.unit_index, &n_units);
  auto tcode = detail::dense_codes(design.time_index, &n_times);

  Eigen::MatrixXd M(n, k + 1);
  M.col(0) = design.outcome;
  M.rightCols(k) = design.regressors;
  const int sweeps = detail::two_way_demean(M, ucode, n_units, tcode, n_times);

  Eigen::MatrixXd X = M.rightCols(k);
  Eigen::VectorXd y = M.col(0);

  // Conditioning check on the absorbed design. A regressor soaked up by the
  // fixed effects shows up here as a zero eigenvalue.
  Eigen::MatrixXd S = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double lmax = es.eigenvalues()(k - 1);
  const double lmin = es.eigenvalues()(0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (lmax <= 0.0 || lmin < detail::kRcondMin * lmax) {
    const long rank = qr.rank();
    const auto& perm = qr.colsPermutation().indices();
    std::string who;
    const long from = std::min(rank, k - 1);
    for (long j = from; j < k; ++j) {
      if (!who.empty()) who += ", ";
      who += "'" + design.names[static_cast<size_t>(perm(j))] + "'";
    }
    throw CollinearityError("collinear after fixed-effect absorption (rank " +
                            std::to_string(rank) + " of " + std::to_string(k) +
                            "): " + who);
  }

  FitResult res;
  res.names = design.names;
  res.se_type = se_type;
  res.n_obs = n;
  res.sweeps = sweeps;
  res.coefficients = qr.solve(y);
  res.df_resid = n - n_units - n_times + 1 - k;
  res.se_available = res.df_resid >= 1;

  if (res.se_available) {
    Eigen::VectorXd resid = y - X * res.coefficients;
    res.sigma2 = resid.squaredNorm() / static_cast<double>(res.df_resid);

    Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd core = Rinv * Rinv.transpose();  // (R'R)^{-1}
    Eigen::MatrixXd bread = qr.colsPermutation() * core * qr.colsPermutation().transpose();

    if (se_type == SeType::iid) {
      Eigen::MatrixXd cov = res.sigma2 * bread;
      res.covariance = 0.5 * (cov + cov.transpose());
    } else {
      res.covariance = cluster_robust_covariance(design, resid, bread);
    }
  } else {
    res.covariance = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  }
  return res;
}

inline long coefficient_index(const FitResult& fit, const std::string& name) {
  for (size_t i = 0; i < fit.names.size(); ++i)
    if (fit.names[i] == name) return static_cast<long>(i);
  throw FitError("unknown coefficient '" + name + "'");
}

inline double coefficient(const FitResult& fit, const std::string& name) {
  return fit.coefficients(coefficient_index(fit, name));
}

inline double coefficient_se(const FitResult& fit, const std::string& name) {
  const long i = coefficient_index(fit, name);
  if (!fit.se_available)
    throw SeUnavailableError("standard errors unavailable: residual degrees of freedom is " +
                             std::to_string(fit.df_resid));
  return std::sqrt(std::max(fit.covariance(i, i), 0.0));
}

}  // namespace msedid
