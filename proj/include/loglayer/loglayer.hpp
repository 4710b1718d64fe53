#pragma once

// Umbrella header for the loglayer library: a numerical laboratory for the
// semilinear Neumann problem
//     -Delta u = u - u^p   in a radial domain,
//     du/dnu   = mu u^q    on the boundary   (0 < q < 1 < p, mu >= 0),
// covering the principal-eigenpair machinery, barrier construction, Newton
// and monotone solvers, continuation in mu, the boundary-blow-up limit
// problem, and the asymptotic verification harness.

#include "asymptotics.hpp"
#include "barriers.hpp"
#include "config.hpp"
#include "eigen.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "limit.hpp"
#include "linalg.hpp"
#include "runner.hpp"
#include "solver.hpp"
