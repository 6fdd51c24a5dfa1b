#include "invdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "invdiff/parallel.hpp"

namespace invdiff {

namespace {
int g_max_threads = 0;
} // namespace

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads() {
    if (g_max_threads > 0) return g_max_threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

bool SigmaGrid::in_aleph(int k) const {
    return std::find(aleph.begin(), aleph.end(), k) != aleph.end();
}

WeightMaps uniform_weights(int rows, int cols) {
    return WeightMaps{Tensor2(rows, cols, 1.0), Tensor2(rows, cols, 1.0)};
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void validate(const ImageGrid& g) {
    if (g.rows() < 1 || g.cols() < 1)
        throw std::invalid_argument("image: empty grid");
    if (!(g.pixel_pitch > 0.0))
        throw std::invalid_argument("image: pixel pitch must be positive");
    if (!all_finite(g.data.vec()))
        throw std::invalid_argument("image: non-finite entries");
}

void validate(const SigmaGrid& g) {
    if (g.edges.size() < 2)
        throw std::invalid_argument("sigma grid: need at least one bin");
    for (std::size_t i = 0; i + 1 < g.edges.size(); ++i)
        if (!(g.edges[i] < g.edges[i + 1]))
            throw std::invalid_argument("sigma grid: edges must be strictly increasing");
    for (int k : g.aleph)
        if (k < 0 || k >= g.bins())
            throw std::invalid_argument("sigma grid: aleph index out of range");
}

void validate(const PsdrStack& s) {
    validate(s.sigma);
    if (s.coeffs.planes() != s.sigma.bins())
        throw std::invalid_argument("stack: plane count does not match sigma bins");
    if (s.rows() < 1 || s.cols() < 1)
        throw std::invalid_argument("stack: empty grid");
    if (!all_finite(s.coeffs.vec()))
        throw std::invalid_argument("stack: non-finite entries");
}

void validate(const WeightMaps& w) {
    if (!w.w2.same_shape(w.mu))
        throw std::invalid_argument("weights: w2 and mu shapes differ");
    for (double x : w.w2.vec())
        if (!(x >= 0.0) || !std::isfinite(x))
            throw std::invalid_argument("weights: w2 must be finite and nonnegative");
    for (double x : w.mu.vec())
        if (x != 0.0 && x != 1.0)
            throw std::invalid_argument("weights: mu must be 0/1");
}

} // namespace invdiff
