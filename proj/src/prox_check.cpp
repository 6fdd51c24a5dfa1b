#include <algorithm>
#include <cmath>
#include <limits>

#include "invdiff/prox.hpp"
#include "invdiff/prox_check.hpp"
#include "invdiff/prox_oracles.hpp"
#include "invdiff/rng.hpp"

namespace invdiff {

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

std::vector<double> oracle_project_ellipsoid(const std::vector<double>& x,
                                             const std::vector<double>& xi, double gamma,
                                             double stationarity_tol, int max_iters) {
    const std::size_t n = x.size();
    // Feasible inputs project to themselves.
    double feas = 0.0;
    for (std::size_t i = 0; i < n; ++i) feas += (x[i] / xi[i]) * (x[i] / xi[i]);
    if (std::sqrt(feas) <= gamma) return x;

    double lip = 0.0;
    for (double w : xi) lip = std::max(lip, w * w);
    const double step = 1.0 / lip;

    std::vector<double> z(n, 0.0), zn(n);
    for (int it = 0; it < max_iters; ++it) {
        double nz = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            zn[i] = z[i] - step * xi[i] * (xi[i] * z[i] - x[i]);
            nz += zn[i] * zn[i];
        }
        nz = std::sqrt(nz);
        if (nz > gamma) {
            const double f = gamma / nz;
            for (double& v : zn) v *= f;
        }
        double move = 0.0;
        for (std::size_t i = 0; i < n; ++i) move += (zn[i] - z[i]) * (zn[i] - z[i]);
        z = zn;
        if (std::sqrt(move) * lip <= stationarity_tol) break;
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = xi[i] * z[i];
    return y;
}

double nonneg_group_objective(const std::vector<double>& y, const std::vector<double>& x,
                              const std::vector<double>& xi, double gamma) {
    double q = 0.0, g = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0) return std::numeric_limits<double>::max();
        q += (y[i] - x[i]) * (y[i] - x[i]);
        g += xi[i] * y[i] * xi[i] * y[i];
    }
    return 0.5 * q + gamma * std::sqrt(g);
}

std::vector<double> oracle_min_nonneg_group(const std::vector<double>& x,
                                            const std::vector<double>& xi, double gamma,
                                            int descent_iters) {
    const std::size_t n = x.size();
    std::vector<double> best(n, 0.0);
    double best_f = nonneg_group_objective(best, x, xi, gamma); // the y = 0 branch

    // Any nonzero minimizer has support exactly {i : x_i > 0}: a zero
    // component there would leave the smooth gradient -x_i < 0, violating
    // first-order optimality. On that support, stationarity reads
    // y_i = x_i / (1 + gamma xi_i^2 / m) with m = |xi.*y|_2, a scalar
    // fixed point solvable by bisection.
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) active.push_back(i);

    if (!active.empty()) {
        double hi = 0.0;
        for (std::size_t i : active) hi += xi[i] * x[i] * xi[i] * x[i];
        hi = std::sqrt(hi);
        auto shortfall = [&](double m) {
            double s = 0.0;
            for (std::size_t i : active) {
                const double t = xi[i] * x[i] * m / (m + gamma * xi[i] * xi[i]);
                s += t * t;
            }
            return std::sqrt(s) - m;
        };
        double lo = hi * 1e-18;
        if (shortfall(lo) > 0.0 && shortfall(hi) <= 0.0) {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (shortfall(mid) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            const double m = 0.5 * (lo + hi);
            std::vector<double> cand(n, 0.0);
            for (std::size_t i : active) cand[i] = x[i] / (1.0 + gamma * xi[i] * xi[i] / m);
            const double f = nonneg_group_objective(cand, x, xi, gamma);
            if (f < best_f) {
                best_f = f;
                best = cand;
            }
        }
    }

    // Projected subgradient sweep as an extra candidate; it can only replace
    // the analytic ones by producing a strictly smaller objective.
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::max(0.0, x[i]);
    for (int t = 1; t <= descent_iters; ++t) {
        double gn = 0.0;
        for (std::size_t i = 0; i < n; ++i) gn += xi[i] * y[i] * xi[i] * y[i];
        gn = std::sqrt(gn);
        const double step = 0.5 / std::sqrt(static_cast<double>(t));
        for (std::size_t i = 0; i < n; ++i) {
            const double sub = gn > 0.0 ? gamma * xi[i] * xi[i] * y[i] / gn : 0.0;
            y[i] = std::max(0.0, y[i] - step * (y[i] - x[i] + sub));
        }
        const double f = nonneg_group_objective(y, x, xi, gamma);
        if (f < best_f) {
            best_f = f;
            best = y;
        }
    }
    return best;
}

ProxCheckReport run_prox_check(std::uint64_t seed, int cases, bool inject_bug) {
    ProxCheckReport rep;
    rep.cases = cases;
    if (cases <= 0) {
        rep.vacuous = true;
        return rep;
    }
    const CounterRng rng(seed);
    std::uint64_t draw = 0;
    auto u = [&] { return rng.uniform(draw++); };

    for (int c = 0; c < cases; ++c) {
        const int dim = 1 + static_cast<int>(u() * 16.0);
        std::vector<double> x(static_cast<std::size_t>(dim)), xi(x.size());
        for (auto& v : x) v = 6.0 * (u() - 0.5);
        for (auto& v : xi) v = 0.2 + 2.8 * u();
        const double gamma = 0.05 + 2.45 * u();

        // Moreau decomposition residual.
        std::vector<double> p = prox_nonneg_group_weighted(x, xi, gamma);
        const std::vector<double> q = prox_conjugate(x, xi, gamma);
        if (inject_bug && c == cases / 2) p[0] += 1e-3;
        for (std::size_t i = 0; i < x.size(); ++i)
            rep.max_moreau = std::max(rep.max_moreau, std::abs(p[i] + q[i] - x[i]));

        // Ellipsoid KKT residuals.
        const EllipsoidProjection proj = project_ellipsoid(x, xi, gamma);
        double feas = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            feas += (proj.y[i] / xi[i]) * (proj.y[i] / xi[i]);
        const double slack = proj.lambda * (feas - gamma * gamma);
        rep.max_kkt = std::max(rep.max_kkt, std::abs(slack) / (gamma * gamma));
        if (proj.lambda < 0.0) rep.max_kkt = std::max(rep.max_kkt, 1.0);
        rep.max_kkt =
            std::max(rep.max_kkt, (std::sqrt(feas) - gamma * (1.0 + 1e-9)) / gamma);
    }

    // Oracle comparisons are costlier; run a tenth of the case budget.
    const int oracle_cases = std::max(1, cases / 10);
    for (int c = 0; c < oracle_cases; ++c) {
        const int dim = 1 + static_cast<int>(u() * 8.0);
        std::vector<double> x(static_cast<std::size_t>(dim)), xi(x.size());
        for (auto& v : x) v = 4.0 * (u() - 0.5);
        for (auto& v : xi) v = 0.3 + 2.2 * u();
        const double gamma = 0.1 + 1.9 * u();

        const std::vector<double> ones(x.size(), 1.0);
        const std::vector<double> ball = prox_nonneg_group_ball(x, gamma);
        const std::vector<double> ball_ref = oracle_min_nonneg_group(x, ones, gamma);
        const std::vector<double> wgt = prox_nonneg_group_weighted(x, xi, gamma);
        const std::vector<double> wgt_ref = oracle_min_nonneg_group(x, xi, gamma);
        for (std::size_t i = 0; i < x.size(); ++i) {
            rep.max_oracle = std::max(rep.max_oracle, std::abs(ball[i] - ball_ref[i]));
            rep.max_oracle = std::max(rep.max_oracle, std::abs(wgt[i] - wgt_ref[i]));
        }
    }
    return rep;
}

bool ProxCheckReport::pass() const {
    if (vacuous) return true;
    return max_moreau <= 1e-8 && max_kkt <= 1e-8 && max_oracle <= 1e-6;
}

} // namespace invdiff
