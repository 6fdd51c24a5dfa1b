#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invdiff/tensor.hpp"

namespace invdiff {

enum class ProxMode { ball, ellipsoid };

/// Projection onto the Euclidean ball of radius gamma.
std::vector<double> project_ball(const std::vector<double>& x, double gamma);

struct EllipsoidProjection {
    std::vector<double> y;
    double lambda = 0.0; // KKT multiplier; 0 when x was already feasible
};

/// Projection onto {y : |y / xi|_2 <= gamma} (elementwise division). Outside
/// the set the projection scales componentwise by xi_i^2 / (xi_i^2 + 2 lambda)
/// where lambda > 0 is the unique root of |xi x / (xi^2 + 2 lambda)|_2 = gamma,
/// found by safeguarded bisection/Newton to |residual| <= tol * gamma.
EllipsoidProjection project_ellipsoid(const std::vector<double>& x,
                                      const std::vector<double>& xi, double gamma,
                                      double tol = 1e-12);

/// prox of gamma * (|.|_2 + nonnegativity indicator):
/// x_+ * max(0, 1 - gamma / |x_+|_2).
std::vector<double> prox_nonneg_group_ball(const std::vector<double>& x, double gamma);

/// prox of gamma * (|xi .|_2 + nonnegativity indicator):
/// x_+ minus its ellipsoid projection.
std::vector<double> prox_nonneg_group_weighted(const std::vector<double>& x,
                                               const std::vector<double>& xi, double gamma,
                                               double tol = 1e-12);

/// prox of the convex conjugate: x_- plus the ellipsoid projection of x_+.
/// Satisfies prox + prox_conjugate = identity (Moreau decomposition).
std::vector<double> prox_conjugate(const std::vector<double>& x,
                                   const std::vector<double>& xi, double gamma,
                                   double tol = 1e-12);

/// Applies the stack prox in place: bins outside aleph get the positive part,
/// the aleph fiber at each pixel gets the group prox (threshold
/// gamma_lambda), and everything outside the mask is zeroed. xi is indexed
/// like the sorted aleph fiber; empty means all ones. mask may be null.
void apply_prox_stack(PsdrStack& a, double gamma_lambda, const std::vector<double>& xi,
                      ProxMode mode, const Tensor2* mask);

struct GroupSparsityValue {
    double value = 0.0;
    bool feasible = true; // false encodes the +infinity sentinel (negative entries)
};

/// Sum over pixels of the xi-weighted Euclidean norm of the aleph fiber.
/// Entries below -1e-12 mark the stack infeasible.
GroupSparsityValue regularizer_value(const PsdrStack& a, const std::vector<double>& xi);

} // namespace invdiff
