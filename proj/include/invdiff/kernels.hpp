#pragma once

#include <cstdint>
#include <vector>

#include "invdiff/tensor.hpp"

namespace invdiff {

enum class Approx { full, rank_r };

/// One separable factor of a kernel: kernel ~= sum_j s_j u_j v_j^T with u_j,
/// v_j length 2R+1.
struct SeparableFactor {
    double s = 0.0;
    std::vector<double> u;
    std::vector<double> v;
};

/// Per-bin blur kernel: the full (2R+1)x(2R+1) matrix plus its leading
/// separable factors (Eckart-Young truncation) and the bin width.
struct BinKernel {
    int radius = 0;
    Tensor2 full;                         // (2R+1)x(2R+1), unit-ish mass
    std::vector<SeparableFactor> factors; // rank factors, s descending
    std::vector<double> singular_values;  // all of them, descending
    double width = 0.0;                   // sigma-bin width
};

struct KernelBank {
    std::vector<BinKernel> bins;
    SigmaGrid sigma;
    int rank = 1;

    int count() const { return static_cast<int>(bins.size()); }
};

/// Builds one kernel per sigma bin as the q-node midpoint-rule average of
/// pixel-center-sampled Gaussians over the bin, truncated at radius
/// ceil(trunc_factor * upper edge). Factors come from the kernel's
/// eigendecomposition; the averaged Gaussian is symmetric positive
/// semidefinite, so that coincides with its singular value decomposition.
KernelBank build_kernel_bank(const SigmaGrid& sigma, int rank, int quadrature_nodes = 5,
                             double trunc_factor = 4.0);

/// d(m,n) = sum_k sqrt(width_k) * (h_k (*) a_k)(m,n), zero-padded boundary.
ImageGrid forward(const KernelBank& bank, const PsdrStack& a, Approx approx);

/// Plane k of the result is mu .* [sqrt(width_k) * h_k (*) (w2 .* d)]; the
/// exact adjoint of `forward` between the w2-weighted image space and the
/// mask-supported stack space.
PsdrStack adjoint(const KernelBank& bank, const ImageGrid& d, const WeightMaps& weights,
                  Approx approx);

/// Largest Rayleigh quotient |A a|_w^2 / |a|^2 seen during power iteration on
/// the normal operator, from a seeded random start. Nondecreasing in iters.
double op_norm_sq(const KernelBank& bank, const WeightMaps& weights, Approx approx,
                  int iters, std::uint64_t seed);

/// sum_k width_k * max(w2) * (sum |h_k|)^2 >= op_norm_sq; usable as a safe
/// 1/eta.
double op_norm_sq_bound(const KernelBank& bank, const WeightMaps& weights, Approx approx);

/// 2D correlation with zero padding; kernels here are symmetric so this
/// equals convolution. Exposed for reuse and tests.
void correlate2(const Tensor2& kernel, int radius, const Tensor2& in, Tensor2& out,
                double scale, bool accumulate);

/// Unit-sum 1D pixel-integrated Gaussian, length 2*ceil(4*sigma)+1.
std::vector<double> integrated_gaussian_1d(double sigma);

/// Separable correlation with a symmetric 1D tap vector along rows then
/// columns (used for the optical blur).
Tensor2 separable_blur(const Tensor2& in, const std::vector<double>& taps);

} // namespace invdiff
