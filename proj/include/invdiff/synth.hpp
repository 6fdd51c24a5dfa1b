#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invdiff/kernels.hpp"
#include "invdiff/tensor.hpp"

namespace invdiff {

enum class ProfileKind { uniform, triangular_decay, custom };

struct Cell {
    int row = 0;
    int col = 0;
    double total = 0.0;          // released particles, arbitrary units
    std::vector<double> profile; // fraction per generation bin, sums to 1
};

struct Scene {
    int rows = 0;
    int cols = 0;
    std::vector<Cell> cells;
    std::uint64_t seed = 0;
};

struct SceneParams {
    int n_cells = 1;
    int rows = 128;
    int cols = 128;
    double q_max = 1.0;
    ProfileKind profile = ProfileKind::uniform;
    std::vector<double> custom_profile; // used when profile == custom
    int gen_bins = 30;
    int margin = 0; // cells stay at least this many pixels from the border
    std::uint64_t seed = 0;
};

/// Quantization-model noise: additive Gaussian with variance 2^(-2b)/12 on
/// the [0, 1] intensity scale.
struct NoiseModel {
    int bits = 8;
    std::uint64_t seed = 0;

    double variance() const;
};

/// Uniform pixel-centered cell locations over the margin-shrunk interior,
/// totals uniform in [q_max/2, q_max]; fully determined by the seed.
Scene make_scene(const SceneParams& params);

/// coeffs[k](m,n) = sum over cells at (m,n) of total * profile[k] /
/// sqrt(width_k) -- the box-basis coefficients of the cell density.
PsdrStack scene_to_psdr(const Scene& scene, const SigmaGrid& gen_sigma);

struct Rendered {
    ImageGrid image; // intensities in [0, 255]
    double gain = 0.0;
};

/// Diffusion forward pass with unapproximated kernels, pixel-integrated
/// Gaussian optical blur, rescale so the peak is exactly 1, additive
/// quantization-model noise, clip to [0, 1], then scale to [0, 255].
Rendered render(const PsdrStack& psdr, const KernelBank& gen_bank, double blur_sigma,
                const NoiseModel& noise);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

} // namespace invdiff
