#include "invdiff/synth.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "invdiff/rng.hpp"

namespace invdiff {

double NoiseModel::variance() const {
    if (bits < 1) throw std::invalid_argument("noise: bits must be >= 1");
    return std::exp2(-2.0 * bits) / 12.0;
}

namespace {

std::vector<double> build_profile(const SceneParams& params) {
    const int kg = params.gen_bins;
    if (kg < 1) throw std::invalid_argument("scene: need at least one generation bin");
    std::vector<double> p(static_cast<std::size_t>(kg));
    switch (params.profile) {
        case ProfileKind::uniform:
            for (auto& v : p) v = 1.0 / kg;
            break;
        case ProfileKind::triangular_decay: {
            const double total = 0.5 * kg * (kg + 1);
            for (int k = 0; k < kg; ++k) p[static_cast<std::size_t>(k)] = (kg - k) / total;
            break;
        }
        case ProfileKind::custom: {
            if (static_cast<int>(params.custom_profile.size()) != kg)
                throw std::invalid_argument("scene: custom profile length must match gen_bins");
            double sum = 0.0;
            for (double v : params.custom_profile) {
                if (v < 0.0) throw std::invalid_argument("scene: profile entries must be >= 0");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-6)
                throw std::invalid_argument("scene: custom profile must sum to 1");
            p = params.custom_profile;
            for (double& v : p) v /= sum;
            break;
        }
    }
    return p;
}

} // namespace

Scene make_scene(const SceneParams& params) {
    if (params.n_cells < 1) throw std::invalid_argument("scene: need at least one cell");
    if (!(params.q_max > 0.0)) throw std::invalid_argument("scene: q_max must be positive");
    const int row_lo = params.margin, row_hi = params.rows - 1 - params.margin;
    const int col_lo = params.margin, col_hi = params.cols - 1 - params.margin;
    if (row_lo > row_hi || col_lo > col_hi)
        throw std::invalid_argument("scene: margin leaves no interior pixels");
    const long interior =
        static_cast<long>(row_hi - row_lo + 1) * static_cast<long>(col_hi - col_lo + 1);
    if (params.n_cells > interior)
        throw std::invalid_argument("scene: more cells than interior pixels");

    const std::vector<double> profile = build_profile(params);
    const CounterRng rng(stage_seed(params.seed, "scene"));

    Scene scene;
    scene.rows = params.rows;
    scene.cols = params.cols;
    scene.seed = params.seed;
    scene.cells.resize(static_cast<std::size_t>(params.n_cells));
    for (int i = 0; i < params.n_cells; ++i) {
        Cell& c = scene.cells[static_cast<std::size_t>(i)];
        const std::uint64_t base = static_cast<std::uint64_t>(3 * i);
        c.row = static_cast<int>(rng.uniform_int(base, row_lo, row_hi));
        c.col = static_cast<int>(rng.uniform_int(base + 1, col_lo, col_hi));
        c.total = params.q_max * (0.5 + 0.5 * rng.uniform(base + 2));
        c.profile = profile;
    }
    return scene;
}

PsdrStack scene_to_psdr(const Scene& scene, const SigmaGrid& gen_sigma) {
    validate(gen_sigma);
    PsdrStack s;
    s.sigma = gen_sigma;
    s.coeffs = Tensor3(gen_sigma.bins(), scene.rows, scene.cols, 0.0);
    for (const Cell& c : scene.cells) {
        if (c.row < 0 || c.row >= scene.rows || c.col < 0 || c.col >= scene.cols)
            throw std::invalid_argument("scene: cell outside the image");
        if (static_cast<int>(c.profile.size()) != gen_sigma.bins())
            throw std::invalid_argument("scene: profile length does not match sigma grid");
        for (int k = 0; k < gen_sigma.bins(); ++k)
            s.coeffs.at(k, c.row, c.col) +=
                c.total * c.profile[static_cast<std::size_t>(k)] / std::sqrt(gen_sigma.width(k));
    }
    return s;
}

Rendered render(const PsdrStack& psdr, const KernelBank& gen_bank, double blur_sigma,
                const NoiseModel& noise) {
    if (!(blur_sigma > 0.0)) throw std::invalid_argument("render: blur sigma must be positive");

    ImageGrid d = forward(gen_bank, psdr, Approx::full);
    d.data = separable_blur(d.data, integrated_gaussian_1d(blur_sigma));

    double peak = 0.0;
    for (double v : d.data.vec()) peak = std::max(peak, v);
    if (!(peak > 0.0))
        throw std::runtime_error("render: blurred image is identically zero, gain undefined");

    // Divide by the peak (rather than multiplying by 1/peak) so the maximum
    // is exactly 1 before noise.
    for (double& v : d.data.vec()) v /= peak;

    const double sd = std::sqrt(noise.variance());
    const CounterRng rng(stage_seed(noise.seed, "noise"));
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        double v = d.data.data()[i] + sd * rng.normal(i);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        d.data.data()[i] = 255.0 * v;
    }

    return Rendered{std::move(d), 1.0 / peak};
}

std::string scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["dims"] = {scene.rows, scene.cols};
    j["seed"] = scene.seed;
    nlohmann::json cells = nlohmann::json::array();
    for (const Cell& c : scene.cells) {
        nlohmann::json jc;
        jc["m"] = c.row;
        jc["n"] = c.col;
        jc["q"] = c.total;
        jc["profile"] = c.profile;
        cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Scene scene;
    scene.rows = j.at("dims").at(0).get<int>();
    scene.cols = j.at("dims").at(1).get<int>();
    scene.seed = j.value("seed", std::uint64_t{0});
    for (const auto& jc : j.at("cells")) {
        Cell c;
        c.row = jc.at("m").get<int>();
        c.col = jc.at("n").get<int>();
        c.total = jc.at("q").get<double>();
        c.profile = jc.at("profile").get<std::vector<double>>();
        scene.cells.push_back(std::move(c));
    }
    return scene;
}

} // namespace invdiff
