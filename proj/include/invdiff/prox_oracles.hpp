#pragma once

#include <vector>

namespace invdiff {

/// Brute-force references for the prox/projection operators. These solve the
/// same minimization problems through unrelated numerical routes (projected
/// gradient, projected subgradient, scalar fixed points on the active set) so
/// they can certify the closed-form implementations.

/// argmin over |z|_2 <= gamma of 0.5 * |xi.*z - x|^2, returned as y = xi.*z.
/// Projected gradient with the closed-form ball clamp, run to the given
/// fixed-point stationarity.
std::vector<double> oracle_project_ellipsoid(const std::vector<double>& x,
                                             const std::vector<double>& xi, double gamma,
                                             double stationarity_tol = 1e-10,
                                             int max_iters = 200000);

/// argmin over y >= 0 of 0.5 * |y - x|^2 + gamma * |xi.*y|_2 via projected
/// subgradient descent (active-set discovery) followed by a scalar
/// fixed-point polish on the discovered support, keeping whichever candidate
/// has the smallest objective.
std::vector<double> oracle_min_nonneg_group(const std::vector<double>& x,
                                            const std::vector<double>& xi, double gamma,
                                            int descent_iters = 20000);

/// Objective of the problem above, +inf substitute (huge) when y < 0.
double nonneg_group_objective(const std::vector<double>& y, const std::vector<double>& x,
                              const std::vector<double>& xi, double gamma);

} // namespace invdiff
