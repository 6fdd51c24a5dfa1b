#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "invdiff/kernels.hpp"
#include "invdiff/prox.hpp"
#include "invdiff/tensor.hpp"

namespace invdiff {

enum class StepMode { power_iteration, analytic_bound, fixed };
enum class Momentum { fista, none };

struct SolveConfig {
    double lambda = 0.5;
    int iters = 10000;
    StepMode step_mode = StepMode::power_iteration;
    double fixed_eta = 0.0; // used when step_mode == fixed
    Momentum momentum = Momentum::fista;
    Approx approx = Approx::rank_r;
    int log_every = 10;
    std::optional<double> tol_rel_cost; // early stop over a 50-iteration window
    ProxMode prox_mode = ProxMode::ball;
    std::vector<double> xi; // per-aleph-bin weights; empty = ones

    int power_iters = 100;
    std::uint64_t power_seed = 0x9E3779B97F4A7C15ULL;
};

struct SolveLogRow {
    int iter = 0;
    double cost = 0.0;
    double nse = 0.0;
    double gs = 0.0;
};

struct SolveLog {
    std::vector<SolveLogRow> rows;
    double eta = 0.0; // step size actually used
};

struct CostBreakdown {
    double cost = 0.0;
    double nse = 0.0;
    double gs = 0.0;
    bool feasible = true;
};

/// Momentum recursion: t = (1 + sqrt(1 + 4 t_prev^2)) / 2,
/// alpha = (t_prev - 1) / t. Requires t_prev >= 1; alpha lies in [0, 1).
std::pair<double, double> fista_momentum(double t_prev);

/// Weighted data term plus lambda times the group regularizer:
/// cost = |A a - d|_w^2 + lambda * GS, nse = |A a - d|_w^2 / |d|_w^2
/// (zero observation yields nse = 0).
CostBreakdown cost(const PsdrStack& a, const ImageGrid& d_obs, const KernelBank& bank,
                   const WeightMaps& weights, double lambda, Approx approx,
                   const std::vector<double>& xi);

struct SolveResult {
    PsdrStack a_opt;
    SolveLog log;
};

/// Accelerated proximal gradient on the regularized inverse-diffusion
/// objective. Per iteration: extrapolate, take the gradient step
/// b - eta A*(A b - d), then apply the nonnegative group prox with threshold
/// eta * lambda / 2. Metrics are logged at iteration 0, every `log_every`
/// iterations and at the last one. `observer`, when set, receives every
/// logged iterate. Throws on non-finite cost (divergence).
SolveResult solve(const ImageGrid& d_obs, const KernelBank& bank, const WeightMaps& weights,
                  const SolveConfig& cfg, const PsdrStack* a0 = nullptr,
                  const std::function<void(int, const PsdrStack&)>& observer = {});

/// CSV rows `iter,cost,nse,gs` with 12 significant digits.
std::string solve_log_csv(const SolveLog& log);

} // namespace invdiff
