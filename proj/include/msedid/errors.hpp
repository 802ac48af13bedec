#pragma once

#include <stdexcept>
#include <string>

namespace msedid {

// Error taxonomy. The CLI maps input errors to exit code 2 and estimation
// errors to exit code 3, so every exception carries its category.
enum class ErrorCategory { input, estimation };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(msg), category_(cat) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Malformed CSV input: bad header, bad row, unparseable field.
class CsvError : public Error {
 public:
  explicit CsvError(const std::string& msg) : Error(ErrorCategory::input, msg) {}
};

// Structurally invalid panel: duplicates, missing group, bad t*.
class PanelError : public Error {
 public:
  explicit PanelError(const std::string& msg) : Error(ErrorCategory::input, msg) {}
};

// Bad key or value in a config file or flag.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(ErrorCategory::input, msg) {}
};

// Pre-trends window request outside the feasible range.
class WindowError : public Error {
 public:
  explicit WindowError(const std::string& msg)
      : Error(ErrorCategory::estimation, msg) {}
};

// Regression-level failure that is not collinearity (dimension mismatch,
// unknown coefficient name, single-cluster covariance, ...).
class FitError : public Error {
 public:
  explicit FitError(const std::string& msg)
      : Error(ErrorCategory::estimation, msg) {}
};

// Design rank-deficient after absorbing fixed effects.
class CollinearityError : public FitError {
 public:
  explicit CollinearityError(const std::string& msg) : FitError(msg) {}
};

// Zero residual degrees of freedom: coefficients exist, standard errors do not.
class SeUnavailableError : public FitError {
 public:
  explicit SeUnavailableError(const std::string& msg) : FitError(msg) {}
};

// Estimator preconditions violated (missing period, unbalanced panel, ...).
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& msg)
      : Error(ErrorCategory::estimation, msg) {}
};

// Window-length selection failed (no candidates, non-finite MSE, ...).
class SelectionError : public Error {
 public:
  explicit SelectionError(const std::string& msg)
      : Error(ErrorCategory::estimation, msg) {}
};

}  // namespace msedid
