#include "invdiff/solver.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace invdiff {

std::pair<double, double> fista_momentum(double t_prev) {
    if (!(t_prev >= 1.0)) throw std::invalid_argument("fista_momentum: t_prev must be >= 1");
    const double t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
    return {t, (t_prev - 1.0) / t};
}

CostBreakdown cost(const PsdrStack& a, const ImageGrid& d_obs, const KernelBank& bank,
                   const WeightMaps& weights, double lambda, Approx approx,
                   const std::vector<double>& xi) {
    const ImageGrid pred = forward(bank, a, approx);
    if (!pred.data.same_shape(d_obs.data))
        throw std::invalid_argument("cost: prediction/observation shape mismatch");
    double data = 0.0, dnorm = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double r = pred.data.data()[i] - d_obs.data.data()[i];
        data += weights.w2.data()[i] * r * r;
        dnorm += weights.w2.data()[i] * d_obs.data.data()[i] * d_obs.data.data()[i];
    }
    const GroupSparsityValue gs = regularizer_value(a, xi);
    CostBreakdown out;
    out.nse = dnorm > 0.0 ? data / dnorm : 0.0;
    out.gs = gs.value;
    out.feasible = gs.feasible;
    out.cost = data + lambda * gs.value;
    return out;
}

SolveResult solve(const ImageGrid& d_obs, const KernelBank& bank, const WeightMaps& weights,
                  const SolveConfig& cfg, const PsdrStack* a0,
                  const std::function<void(int, const PsdrStack&)>& observer) {
    if (cfg.iters < 1) throw std::invalid_argument("solve: need at least one iteration");
    if (cfg.log_every < 1) throw std::invalid_argument("solve: log_every must be positive");
    if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("solve: lambda must be nonnegative");
    if (!d_obs.data.same_shape(weights.w2))
        throw std::invalid_argument("solve: observation/weight shape mismatch");

    double eta = 0.0;
    switch (cfg.step_mode) {
        case StepMode::power_iteration: {
            const double s2 =
                op_norm_sq(bank, weights, cfg.approx, cfg.power_iters, cfg.power_seed);
            if (!(s2 > 0.0)) throw std::runtime_error("solve: operator norm estimate is zero");
            eta = (1.0 - 1e-3) / s2;
            break;
        }
        case StepMode::analytic_bound: {
            const double bound = op_norm_sq_bound(bank, weights, cfg.approx);
            if (!(bound > 0.0)) throw std::runtime_error("solve: operator norm bound is zero");
            eta = 1.0 / bound;
            break;
        }
        case StepMode::fixed:
            if (!(cfg.fixed_eta > 0.0))
                throw std::invalid_argument("solve: fixed step size must be positive");
            eta = cfg.fixed_eta;
            break;
    }
    const double threshold = 0.5 * eta * cfg.lambda;

    PsdrStack a;
    if (a0) {
        if (a0->rows() != d_obs.rows() || a0->cols() != d_obs.cols() ||
            a0->bins() != bank.count())
            throw std::invalid_argument("solve: warm start shape mismatch");
        a = *a0;
        a.sigma = bank.sigma;
    } else {
        a.sigma = bank.sigma;
        a.coeffs = Tensor3(bank.count(), d_obs.rows(), d_obs.cols(), 0.0);
    }
    PsdrStack a_prev = a;
    PsdrStack b = a;

    SolveResult res;
    res.log.eta = eta;

    auto log_iterate = [&](int iter, const PsdrStack& it) {
        const CostBreakdown c = cost(it, d_obs, bank, weights, cfg.lambda, cfg.approx, cfg.xi);
        if (!std::isfinite(c.cost))
            throw std::runtime_error("solve: diverged (non-finite cost at iteration " +
                                     std::to_string(iter) + "); check the step size");
        res.log.rows.push_back({iter, c.cost, c.nse, c.gs});
        if (observer) observer(iter, it);
    };
    log_iterate(0, a);

    double t_prev = 1.0;
    for (int i = 1; i <= cfg.iters; ++i) {
        double alpha = 0.0;
        if (cfg.momentum == Momentum::fista) {
            const auto [t, al] = fista_momentum(t_prev);
            t_prev = t;
            alpha = al;
        }

        const ImageGrid pred = forward(bank, b, cfg.approx);
        ImageGrid resid;
        resid.data = Tensor2(pred.rows(), pred.cols());
        for (std::size_t j = 0; j < resid.data.size(); ++j)
            resid.data.data()[j] = pred.data.data()[j] - d_obs.data.data()[j];
        const PsdrStack grad = adjoint(bank, resid, weights, cfg.approx);

        PsdrStack next = b;
        for (std::size_t j = 0; j < next.coeffs.size(); ++j)
            next.coeffs.vec()[j] -= eta * grad.coeffs.vec()[j];
        apply_prox_stack(next, threshold, cfg.xi, cfg.prox_mode, &weights.mu);

        for (std::size_t j = 0; j < b.coeffs.size(); ++j)
            b.coeffs.vec()[j] =
                next.coeffs.vec()[j] + alpha * (next.coeffs.vec()[j] - a_prev.coeffs.vec()[j]);
        a_prev = std::move(next);

        const bool last = i == cfg.iters;
        if (i % cfg.log_every == 0 || last) log_iterate(i, a_prev);

        if (cfg.tol_rel_cost && res.log.rows.size() >= 2) {
            const SolveLogRow& now = res.log.rows.back();
            for (auto it = res.log.rows.rbegin(); it != res.log.rows.rend(); ++it) {
                if (now.iter - it->iter < 50) continue;
                const double ref = std::max(std::abs(it->cost), 1e-300);
                if (std::abs(now.cost - it->cost) <= *cfg.tol_rel_cost * ref) {
                    res.a_opt = std::move(a_prev);
                    return res;
                }
                break;
            }
        }
    }
    res.a_opt = std::move(a_prev);
    return res;
}

std::string solve_log_csv(const SolveLog& log) {
    std::string out = "iter,cost,nse,gs\n";
    char buf[160];
    for (const auto& r : log.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g\n", r.iter, r.cost, r.nse, r.gs);
        out += buf;
    }
    return out;
}

} // namespace invdiff
