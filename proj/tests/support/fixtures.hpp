#pragma once

// Frozen regression fixtures: published candidate tables from three panel
// studies, reported to the precision shown. Tests feed the (coefficient, se)
// pairs through the rule and compare the derived columns.

#include <vector>

#include "msedid/estimators.hpp"

namespace testsupport {

struct FixtureRow {
  int ell;
  double mse, bias_sq, variance, coefficient, se;
};

// Two trending groups, level effect; selected length 3.
inline const std::vector<FixtureRow>& static_table() {
  static const std::vector<FixtureRow> rows = {
      {0, 124.367, 0.000, 124.367, 100.292, 11.152},
      {1, 77.355, 6.675, 70.681, 102.876, 8.407},
      {2, 68.960, 15.870, 53.091, 96.309, 7.286},
      {3, 60.372, 23.456, 36.916, 95.449, 6.076},
      {4, 81.921, 48.350, 33.571, 93.339, 5.794},
      {5, 76.763, 44.352, 32.411, 93.633, 5.693},
      {6, 84.406, 56.812, 27.594, 92.755, 5.253},
      {7, 108.727, 84.194, 24.534, 91.117, 4.953},
      {8, 115.393, 92.359, 23.033, 90.682, 4.799},
      {9, 97.023, 76.076, 20.947, 91.570, 4.577},
  };
  return rows;
}

// Ramp effect tracked at one event time; selected length 6.
inline const std::vector<FixtureRow>& dynamic_table() {
  static const std::vector<FixtureRow> rows = {
      {0, 1017.981, 0.000, 1017.981, 47.099, 31.906},
      {1, 676.540, 51.938, 624.602, 54.306, 24.992},
      {2, 645.241, 89.283, 555.958, 56.548, 23.579},
      {3, 508.401, 18.735, 489.665, 51.428, 22.128},
      {4, 525.972, 7.822, 518.150, 49.896, 22.763},
      {5, 504.936, 25.067, 479.870, 52.106, 21.906},
      {6, 499.688, 14.774, 484.914, 50.943, 22.021},
      {7, 526.362, 60.236, 466.126, 54.860, 21.590},
      {8, 600.299, 133.914, 466.385, 58.671, 21.596},
      {9, 727.893, 269.806, 458.088, 63.525, 21.403},
  };
  return rows;
}

// Employment panel, small coefficients; selected length 3.
inline const std::vector<FixtureRow>& wage_table() {
  static const std::vector<FixtureRow> rows = {
      {0, 0.0000250, 0.0000000, 0.0000250, 0.00982, 0.00500},
      {1, 0.0000266, 0.0000004, 0.0000262, 0.00917, 0.00512},
      {2, 0.0000247, 0.0000004, 0.0000243, 0.01042, 0.00493},
      {3, 0.0000245, 0.0000011, 0.0000234, 0.01086, 0.00484},
  };
  return rows;
}

inline std::vector<msedid::EstimateRecord> records_from(
    const std::vector<FixtureRow>& rows) {
  std::vector<msedid::EstimateRecord> recs;
  for (const auto& r : rows) {
    msedid::EstimateRecord rec;
    rec.kind = msedid::ModelKind::twfe;
    rec.pre_length = r.ell;
    rec.coefficient = r.coefficient;
    rec.se = r.se;
    rec.n_obs = 100;
    rec.df_resid = 80;
    recs.push_back(rec);
  }
  return recs;
}

}  // namespace testsupport
