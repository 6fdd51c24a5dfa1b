#include "invdiff/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "invdiff/parallel.hpp"

namespace invdiff {

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

} // namespace

std::vector<double> project_ball(const std::vector<double>& x, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("project_ball: gamma must be positive");
    const double n = norm2(x);
    if (n <= gamma) return x;
    std::vector<double> y(x.size());
    const double f = gamma / n;
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f * x[i];
    return y;
}

EllipsoidProjection project_ellipsoid(const std::vector<double>& x,
                                      const std::vector<double>& xi, double gamma,
                                      double tol) {
    if (!(gamma > 0.0)) throw std::invalid_argument("project_ellipsoid: gamma must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("project_ellipsoid: tol must be positive");
    if (xi.size() != x.size())
        throw std::invalid_argument("project_ellipsoid: xi/x size mismatch");
    check_finite(x, "project_ellipsoid");
    double xi_max = 0.0;
    for (double w : xi) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("project_ellipsoid: xi must be strictly positive");
        xi_max = std::max(xi_max, w);
    }

    // residual(lambda) = |xi x / (xi^2 + 2 lambda)|_2 - gamma, strictly
    // decreasing for lambda >= 0.
    auto residual = [&](double lambda, double* deriv) {
        double s = 0.0, ds = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double den = xi[i] * xi[i] + 2.0 * lambda;
            const double t = xi[i] * x[i] / den;
            s += t * t;
            ds += -4.0 * t * t / den;
        }
        const double n = std::sqrt(s);
        if (deriv) *deriv = n > 0.0 ? ds / (2.0 * n) : 0.0;
        return n - gamma;
    };

    if (residual(0.0, nullptr) <= 0.0) return {x, 0.0};

    double lo = 0.0;
    double hi = xi_max * norm2(x) / (2.0 * gamma); // residual(hi) <= 0 by construction
    double lambda = 0.5 * hi;
    for (int it = 0; it < 200; ++it) {
        double deriv = 0.0;
        const double r = residual(lambda, &deriv);
        if (std::abs(r) <= tol * gamma) break;
        if (r > 0.0)
            lo = lambda;
        else
            hi = lambda;
        double next = deriv < 0.0 ? lambda - r / deriv : lambda;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        lambda = next;
    }

    EllipsoidProjection out;
    out.lambda = lambda;
    out.y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.y[i] = xi[i] * xi[i] * x[i] / (xi[i] * xi[i] + 2.0 * lambda);
    return out;
}

std::vector<double> prox_nonneg_group_ball(const std::vector<double>& x, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("prox: gamma must be positive");
    std::vector<double> y(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] > 0.0 ? x[i] : 0.0;
        s += y[i] * y[i];
    }
    const double n = std::sqrt(s);
    const double f = n > gamma ? 1.0 - gamma / n : 0.0;
    for (double& v : y) v *= f;
    return y;
}

std::vector<double> prox_nonneg_group_weighted(const std::vector<double>& x,
                                               const std::vector<double>& xi, double gamma,
                                               double tol) {
    std::vector<double> xp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xp[i] = x[i] > 0.0 ? x[i] : 0.0;
    const EllipsoidProjection p = project_ellipsoid(xp, xi, gamma, tol);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(0.0, xp[i] - p.y[i]);
    return y;
}

std::vector<double> prox_conjugate(const std::vector<double>& x,
                                   const std::vector<double>& xi, double gamma,
                                   double tol) {
    std::vector<double> xp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xp[i] = x[i] > 0.0 ? x[i] : 0.0;
    const EllipsoidProjection p = project_ellipsoid(xp, xi, gamma, tol);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xn = x[i] < 0.0 ? x[i] : 0.0;
        y[i] = xn + p.y[i];
    }
    return y;
}

void apply_prox_stack(PsdrStack& a, double gamma_lambda, const std::vector<double>& xi,
                      ProxMode mode, const Tensor2* mask) {
    if (!(gamma_lambda >= 0.0))
        throw std::invalid_argument("apply_prox_stack: threshold must be nonnegative");
    if (mask && (mask->rows() != a.rows() || mask->cols() != a.cols()))
        throw std::invalid_argument("apply_prox_stack: mask shape mismatch");
    const std::vector<int>& aleph = a.sigma.aleph;
    if (!xi.empty() && xi.size() != aleph.size())
        throw std::invalid_argument("apply_prox_stack: xi must match aleph size");

    const int bins = a.bins();
    const std::size_t pixels = static_cast<std::size_t>(a.rows()) * a.cols();
    std::vector<char> in_aleph(static_cast<std::size_t>(bins), 0);
    for (int k : aleph) in_aleph[static_cast<std::size_t>(k)] = 1;

    double* base = a.coeffs.data();
    parallel_for(0, pixels, [&](std::size_t p) {
        if (mask && mask->data()[p] == 0.0) {
            for (int k = 0; k < bins; ++k) base[static_cast<std::size_t>(k) * pixels + p] = 0.0;
            return;
        }
        // Positive part everywhere; group shrink only on the aleph fiber.
        for (int k = 0; k < bins; ++k) {
            double& c = base[static_cast<std::size_t>(k) * pixels + p];
            c = c > 0.0 ? c : 0.0;
        }
        if (aleph.empty() || gamma_lambda == 0.0) return;

        if (mode == ProxMode::ball && xi.empty()) {
            double s = 0.0;
            for (int k : aleph) {
                const double c = base[static_cast<std::size_t>(k) * pixels + p];
                s += c * c;
            }
            const double n = std::sqrt(s);
            const double f = n > gamma_lambda ? 1.0 - gamma_lambda / n : 0.0;
            for (int k : aleph) base[static_cast<std::size_t>(k) * pixels + p] *= f;
            return;
        }

        thread_local std::vector<double> fiber, ones;
        fiber.resize(aleph.size());
        for (std::size_t j = 0; j < aleph.size(); ++j)
            fiber[j] = base[static_cast<std::size_t>(aleph[j]) * pixels + p];
        std::vector<double> out;
        if (mode == ProxMode::ball) {
            out = prox_nonneg_group_ball(fiber, gamma_lambda);
        } else {
            const std::vector<double>* w = &xi;
            if (xi.empty()) {
                ones.assign(aleph.size(), 1.0);
                w = &ones;
            }
            out = prox_nonneg_group_weighted(fiber, *w, gamma_lambda);
        }
        for (std::size_t j = 0; j < aleph.size(); ++j)
            base[static_cast<std::size_t>(aleph[j]) * pixels + p] = out[j];
    });
}

GroupSparsityValue regularizer_value(const PsdrStack& a, const std::vector<double>& xi) {
    const std::vector<int>& aleph = a.sigma.aleph;
    if (!xi.empty() && xi.size() != aleph.size())
        throw std::invalid_argument("regularizer_value: xi must match aleph size");
    GroupSparsityValue out;
    for (double c : a.coeffs.vec())
        if (c < -1e-12) {
            out.feasible = false;
            break;
        }
    const std::size_t pixels = static_cast<std::size_t>(a.rows()) * a.cols();
    const double* base = a.coeffs.data();
    double total = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
        double s = 0.0;
        for (std::size_t j = 0; j < aleph.size(); ++j) {
            const double w = xi.empty() ? 1.0 : xi[j];
            const double c = w * base[static_cast<std::size_t>(aleph[j]) * pixels + p];
            s += c * c;
        }
        total += std::sqrt(s);
    }
    out.value = total;
    return out;
}

} // namespace invdiff
