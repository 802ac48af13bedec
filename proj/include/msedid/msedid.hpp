#pragma once

// Umbrella header: panel container, fixed-effects OLS, DiD estimators,
// MSE-based pre-trends window selection, and the simulation driver.

#include "msedid/csv.hpp"
#include "msedid/errors.hpp"
#include "msedid/estimators.hpp"
#include "msedid/fe_ols.hpp"
#include "msedid/panel.hpp"
#include "msedid/selector.hpp"
#include "msedid/simulate.hpp"
#include "msedid/version.hpp"
