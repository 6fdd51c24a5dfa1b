#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "invdiff/kernels.hpp"
#include "invdiff/solver.hpp"
#include "invdiff/synth.hpp"
#include "invdiff/tensor.hpp"

namespace invdiff {

/// Full pipeline configuration. JSON parsing is strict: unknown keys are
/// rejected and every invariant of the inner types is enforced at load.
struct RunConfig {
    // grid
    int rows = 128;
    int cols = 128;
    double pixel_pitch = 6.45;

    // sigma (analysis grid; aleph is 1-based in JSON, 0-based here)
    std::vector<double> sigma_edges;
    std::vector<int> aleph;

    // synth
    int n_cells = 20;
    double q_max = 1.0;
    std::string profile = "triangular_decay";
    std::vector<double> custom_profile;
    int gen_bins = 30;
    double gen_sigma_lo = 1.0;
    double gen_sigma_hi = 16.1;
    double sigma_b = 2.28;
    int bits = 10;
    int margin = 16;
    std::uint64_t seed = 1234;

    // solve
    double lambda = 0.5;
    int iters = 2000;
    int rank = 1; // 0 means the full kernels
    std::string step_mode = "power_iteration";
    std::string momentum = "fista";
    int log_every = 10;
    std::optional<double> tol_rel_cost;

    // detect
    double tolerance = 3.0;
    bool strict_diameter = false;

    // emd
    double prune_eps = 1e-8;

    SigmaGrid analysis_sigma() const;
    SigmaGrid generation_sigma() const;
    SceneParams scene_params() const;
    SolveConfig solve_config() const;
    Approx approx() const { return rank == 0 ? Approx::full : Approx::rank_r; }
    int bank_rank() const { return rank == 0 ? 1 : rank; }
    double match_radius() const { return strict_diameter ? 0.5 * tolerance : tolerance; }
};

RunConfig config_from_json(const std::string& text);

/// In-repo presets; throws for unknown names. Current names: "desk",
/// "paper-full".
std::string preset_json(const std::string& name);

} // namespace invdiff
