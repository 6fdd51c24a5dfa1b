#include "invdiff/config.hpp"

#include <stdexcept>

#include <json.hpp>

namespace invdiff {

namespace {

void check_keys(const nlohmann::json& obj, const char* section,
                const std::vector<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument(std::string("config: unknown key '") + it.key() +
                                        "' in section '" + section + "'");
    }
}

} // namespace

SigmaGrid RunConfig::analysis_sigma() const {
    SigmaGrid g;
    g.edges = sigma_edges;
    g.aleph = aleph;
    validate(g);
    return g;
}

SigmaGrid RunConfig::generation_sigma() const {
    SigmaGrid g;
    g.edges.resize(static_cast<std::size_t>(gen_bins) + 1);
    for (int k = 0; k <= gen_bins; ++k)
        g.edges[static_cast<std::size_t>(k)] =
            gen_sigma_lo + (gen_sigma_hi - gen_sigma_lo) * k / gen_bins;
    validate(g);
    return g;
}

SceneParams RunConfig::scene_params() const {
    SceneParams p;
    p.n_cells = n_cells;
    p.rows = rows;
    p.cols = cols;
    p.q_max = q_max;
    if (profile == "uniform")
        p.profile = ProfileKind::uniform;
    else if (profile == "triangular_decay")
        p.profile = ProfileKind::triangular_decay;
    else if (profile == "custom") {
        p.profile = ProfileKind::custom;
        p.custom_profile = custom_profile;
    } else {
        throw std::invalid_argument("config: unknown profile kind '" + profile + "'");
    }
    p.gen_bins = gen_bins;
    p.margin = margin;
    p.seed = seed;
    return p;
}

SolveConfig RunConfig::solve_config() const {
    SolveConfig c;
    c.lambda = lambda;
    c.iters = iters;
    if (step_mode == "power_iteration")
        c.step_mode = StepMode::power_iteration;
    else if (step_mode == "analytic_bound")
        c.step_mode = StepMode::analytic_bound;
    else if (step_mode.rfind("fixed:", 0) == 0) {
        c.step_mode = StepMode::fixed;
        c.fixed_eta = std::stod(step_mode.substr(6));
    } else {
        throw std::invalid_argument("config: unknown step_mode '" + step_mode + "'");
    }
    if (momentum == "fista")
        c.momentum = Momentum::fista;
    else if (momentum == "none")
        c.momentum = Momentum::none;
    else
        throw std::invalid_argument("config: unknown momentum '" + momentum + "'");
    c.approx = approx();
    c.log_every = log_every;
    c.tol_rel_cost = tol_rel_cost;
    return c;
}

RunConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(j, "top", {"grid", "sigma", "synth", "solve", "detect", "emd"});

    RunConfig c;
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        check_keys(g, "grid", {"rows", "cols", "pixel_pitch"});
        c.rows = g.value("rows", c.rows);
        c.cols = g.value("cols", c.cols);
        c.pixel_pitch = g.value("pixel_pitch", c.pixel_pitch);
        if (c.rows < 1 || c.cols < 1 || !(c.pixel_pitch > 0.0))
            throw std::invalid_argument("config: invalid grid");
    }
    if (j.contains("sigma")) {
        const auto& g = j["sigma"];
        check_keys(g, "sigma", {"edges", "aleph"});
        c.sigma_edges = g.at("edges").get<std::vector<double>>();
        if (g.contains("aleph")) {
            c.aleph.clear();
            for (int one_based : g["aleph"].get<std::vector<int>>()) {
                if (one_based < 1 || one_based > static_cast<int>(c.sigma_edges.size()) - 1)
                    throw std::invalid_argument("config: aleph index out of range");
                c.aleph.push_back(one_based - 1);
            }
        }
    }
    if (j.contains("synth")) {
        const auto& g = j["synth"];
        check_keys(g, "synth",
                   {"n_cells", "q_max", "profile", "custom_profile", "gen_bins",
                    "gen_sigma_lo", "gen_sigma_hi", "sigma_b", "bits", "margin", "seed"});
        c.n_cells = g.value("n_cells", c.n_cells);
        c.q_max = g.value("q_max", c.q_max);
        c.profile = g.value("profile", c.profile);
        if (g.contains("custom_profile"))
            c.custom_profile = g["custom_profile"].get<std::vector<double>>();
        c.gen_bins = g.value("gen_bins", c.gen_bins);
        c.gen_sigma_lo = g.value("gen_sigma_lo", c.gen_sigma_lo);
        c.gen_sigma_hi = g.value("gen_sigma_hi", c.gen_sigma_hi);
        c.sigma_b = g.value("sigma_b", c.sigma_b);
        c.bits = g.value("bits", c.bits);
        c.margin = g.value("margin", c.margin);
        c.seed = g.value("seed", c.seed);
        if (c.bits < 1) throw std::invalid_argument("config: bits must be >= 1");
        if (!(c.gen_sigma_lo > 0.0) || !(c.gen_sigma_hi > c.gen_sigma_lo))
            throw std::invalid_argument("config: generation sigma range invalid");
    }
    if (j.contains("solve")) {
        const auto& g = j["solve"];
        check_keys(g, "solve",
                   {"lambda", "iters", "rank", "step_mode", "momentum", "log_every",
                    "tol_rel_cost"});
        c.lambda = g.value("lambda", c.lambda);
        c.iters = g.value("iters", c.iters);
        if (g.contains("rank")) {
            if (g["rank"].is_string()) {
                if (g["rank"].get<std::string>() != "full")
                    throw std::invalid_argument("config: rank must be a positive integer or \"full\"");
                c.rank = 0;
            } else {
                c.rank = g["rank"].get<int>();
                if (c.rank < 1)
                    throw std::invalid_argument("config: rank must be a positive integer or \"full\"");
            }
        }
        c.step_mode = g.value("step_mode", c.step_mode);
        c.momentum = g.value("momentum", c.momentum);
        c.log_every = g.value("log_every", c.log_every);
        if (g.contains("tol_rel_cost")) c.tol_rel_cost = g["tol_rel_cost"].get<double>();
        if (!(c.lambda >= 0.0) || c.iters < 1 || c.log_every < 1)
            throw std::invalid_argument("config: invalid solve section");
    }
    if (j.contains("detect")) {
        const auto& g = j["detect"];
        check_keys(g, "detect", {"tolerance", "strict_diameter"});
        c.tolerance = g.value("tolerance", c.tolerance);
        c.strict_diameter = g.value("strict_diameter", c.strict_diameter);
        if (!(c.tolerance > 0.0)) throw std::invalid_argument("config: tolerance must be > 0");
    }
    if (j.contains("emd")) {
        const auto& g = j["emd"];
        check_keys(g, "emd", {"prune_eps"});
        c.prune_eps = g.value("prune_eps", c.prune_eps);
        if (c.prune_eps < 0.0) throw std::invalid_argument("config: prune_eps must be >= 0");
    }

    if (c.sigma_edges.empty())
        throw std::invalid_argument("config: sigma.edges is required");
    c.analysis_sigma();
    c.generation_sigma();
    if (c.profile == "custom") c.scene_params();
    return c;
}

std::string preset_json(const std::string& name) {
    if (name == "desk") {
        // The custom profile is a Gaussian bump over the generation sigma
        // range (peak 10, width 5 px): secretion mass concentrates at
        // mid-range diffusion widths, giving spots the energy spread that
        // keeps detection stable across the tested lambda range.
        return R"({
  "grid": {"rows": 128, "cols": 128, "pixel_pitch": 6.45},
  "sigma": {"edges": [2.3, 4.0, 6.5, 9.5, 13.0, 18.5], "aleph": [1, 2, 3, 4, 5]},
  "synth": {"n_cells": 20, "q_max": 1.0, "profile": "custom",
            "custom_profile": [0.0101880060537, 0.0120887754527, 0.0141995435253,
                               0.0165106971778, 0.019004454015, 0.0216543094327,
                               0.0244248685951, 0.0272721319614, 0.0301442789213,
                               0.0329829628644, 0.0357250946614, 0.038305052938,
                               0.0406572220593, 0.042718726061, 0.0444322023475,
                               0.0457484457278, 0.0466287532571, 0.0470468141304,
                               0.046990015892, 0.0464600764823, 0.0454729579263,
                               0.044058067715, 0.0422568036315, 0.0401205424884,
                               0.0377082090706, 0.0350835855709, 0.0323125322817,
                               0.0294602869501, 0.0265889940736, 0.0237555887356],
            "gen_bins": 30, "gen_sigma_lo": 1.0, "gen_sigma_hi": 16.1,
            "sigma_b": 2.28, "bits": 10, "margin": 16, "seed": 1234},
  "solve": {"lambda": 0.5, "iters": 2000, "rank": 1,
            "step_mode": "power_iteration", "momentum": "fista", "log_every": 10},
  "detect": {"tolerance": 3.0, "strict_diameter": false},
  "emd": {"prune_eps": 1e-8}
}
)";
    }
    if (name == "paper-full") {
        return R"({
  "grid": {"rows": 512, "cols": 512, "pixel_pitch": 6.45},
  "sigma": {"edges": [2.3, 5, 9, 13, 23, 33, 43, 53, 67],
            "aleph": [1, 2, 3, 4, 5, 6, 7, 8]},
  "synth": {"n_cells": 250, "q_max": 1.0, "profile": "triangular_decay",
            "gen_bins": 30, "gen_sigma_lo": 1.0, "gen_sigma_hi": 64.5,
            "sigma_b": 2.28, "bits": 10, "margin": 64, "seed": 1234},
  "solve": {"lambda": 0.5, "iters": 10000, "rank": 1,
            "step_mode": "power_iteration", "momentum": "fista", "log_every": 10},
  "detect": {"tolerance": 3.0, "strict_diameter": false},
  "emd": {"prune_eps": 1e-8}
}
)";
    }
    throw std::invalid_argument("unknown preset '" + name + "' (have: desk, paper-full)");
}

} // namespace invdiff
