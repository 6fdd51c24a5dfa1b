#include "invdiff/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "invdiff/parallel.hpp"
#include "invdiff/rng.hpp"

namespace invdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// 1D pixel-center samples of a normalized Gaussian, d in [-R, R].
/// Mirrored from the d >= 0 half so the vector is an exact palindrome.
std::vector<double> sampled_gaussian_1d(double sigma, int radius) {
    std::vector<double> f(2 * static_cast<std::size_t>(radius) + 1);
    const double norm = 1.0 / std::sqrt(2.0 * kPi * sigma * sigma);
    for (int d = 0; d <= radius; ++d) {
        const double v = norm * std::exp(-0.5 * d * d / (sigma * sigma));
        f[static_cast<std::size_t>(radius + d)] = v;
        f[static_cast<std::size_t>(radius - d)] = v;
    }
    return f;
}

/// Splits a vector into its even/odd palindrome part (whichever dominates)
/// and renormalizes. The bin kernels commute with coordinate flips, so their
/// eigenvectors belong to one of the two classes up to roundoff; snapping
/// makes rank-r outputs exactly flip-symmetric.
void snap_palindrome(std::vector<double>& u) {
    const std::size_t n = u.size();
    std::vector<double> even(n), odd(n);
    double ne = 0.0, no = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        even[i] = 0.5 * (u[i] + u[n - 1 - i]);
        odd[i] = 0.5 * (u[i] - u[n - 1 - i]);
        ne += even[i] * even[i];
        no += odd[i] * odd[i];
    }
    std::vector<double>& pick = ne >= no ? even : odd;
    const double norm = std::sqrt(ne >= no ? ne : no);
    if (norm == 0.0) return;
    for (std::size_t i = 0; i < n; ++i) u[i] = pick[i] / norm;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

/// Correlation taps along one axis: out[m][n] (+)= scale * sum_d taps[R+d] *
/// in[m+d][n] (rows_axis) or in[m][n+d] (!rows_axis), zero-padded.
void correlate_axis(const std::vector<double>& taps, const Tensor2& in, Tensor2& out,
                    double scale, bool accumulate, bool rows_axis) {
    const int radius = (static_cast<int>(taps.size()) - 1) / 2;
    const int rows = in.rows(), cols = in.cols();
    parallel_for(0, static_cast<std::size_t>(rows), [&](std::size_t mi) {
        const int m = static_cast<int>(mi);
        for (int n = 0; n < cols; ++n) {
            double acc = 0.0;
            if (rows_axis) {
                const int dlo = clampi(-m, -radius, radius);
                const int dhi = clampi(rows - 1 - m, -radius, radius);
                for (int d = dlo; d <= dhi; ++d)
                    acc += taps[static_cast<std::size_t>(radius + d)] * in.at(m + d, n);
            } else {
                const int dlo = clampi(-n, -radius, radius);
                const int dhi = clampi(cols - 1 - n, -radius, radius);
                for (int d = dlo; d <= dhi; ++d)
                    acc += taps[static_cast<std::size_t>(radius + d)] * in.at(m, n + d);
            }
            if (accumulate)
                out.at(m, n) += scale * acc;
            else
                out.at(m, n) = scale * acc;
        }
    });
}

std::size_t count_nonzero(const double* p, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (p[i] != 0.0) ++c;
    return c;
}

/// Scatter form of correlate2 for sparse inputs; serial, fixed order.
void correlate2_scatter(const Tensor2& kernel, int radius, const Tensor2& in, Tensor2& out,
                        double scale) {
    const int rows = in.rows(), cols = in.cols();
    for (int p = 0; p < rows; ++p) {
        for (int q = 0; q < cols; ++q) {
            const double v = in.at(p, q);
            if (v == 0.0) continue;
            const double sv = scale * v;
            const int dmlo = clampi(p - rows + 1, -radius, radius);
            const int dmhi = clampi(p, -radius, radius);
            const int dnlo = clampi(q - cols + 1, -radius, radius);
            const int dnhi = clampi(q, -radius, radius);
            for (int dm = dmlo; dm <= dmhi; ++dm)
                for (int dn = dnlo; dn <= dnhi; ++dn)
                    out.at(p - dm, q - dn) += sv * kernel.at(radius + dm, radius + dn);
        }
    }
}

/// Applies one bin kernel (full or rank-r) to `in`, accumulating
/// scale * (h (*) in) into `out`. `tmp` is scratch of the image shape.
void apply_bin(const BinKernel& bin, Approx approx, const Tensor2& in, Tensor2& out,
               Tensor2& tmp, double scale) {
    if (approx == Approx::full) {
        // Scatter pays off only when the input plane is mostly zeros.
        const std::size_t nnz = count_nonzero(in.data(), in.size());
        if (nnz * 20 < in.size()) {
            correlate2_scatter(bin.full, bin.radius, in, out, scale);
        } else {
            correlate2(bin.full, bin.radius, in, out, scale, true);
        }
        return;
    }
    for (const auto& f : bin.factors) {
        correlate_axis(f.v, in, tmp, 1.0, false, /*rows_axis=*/false);
        correlate_axis(f.u, tmp, out, scale * f.s, true, /*rows_axis=*/true);
    }
}

} // namespace

void correlate2(const Tensor2& kernel, int radius, const Tensor2& in, Tensor2& out,
                double scale, bool accumulate) {
    const int rows = in.rows(), cols = in.cols();
    parallel_for(0, static_cast<std::size_t>(rows), [&](std::size_t mi) {
        const int m = static_cast<int>(mi);
        const int dmlo = clampi(-m, -radius, radius);
        const int dmhi = clampi(rows - 1 - m, -radius, radius);
        for (int n = 0; n < cols; ++n) {
            const int dnlo = clampi(-n, -radius, radius);
            const int dnhi = clampi(cols - 1 - n, -radius, radius);
            double acc = 0.0;
            for (int dm = dmlo; dm <= dmhi; ++dm) {
                double row_acc = 0.0;
                for (int dn = dnlo; dn <= dnhi; ++dn)
                    row_acc += kernel.at(radius + dm, radius + dn) * in.at(m + dm, n + dn);
                acc += row_acc;
            }
            if (accumulate)
                out.at(m, n) += scale * acc;
            else
                out.at(m, n) = scale * acc;
        }
    });
}

KernelBank build_kernel_bank(const SigmaGrid& sigma, int rank, int quadrature_nodes,
                             double trunc_factor) {
    validate(sigma);
    if (sigma.edges.front() <= 0.0)
        throw std::invalid_argument("kernel bank: sigma_0 must be positive");
    if (rank < 1) throw std::invalid_argument("kernel bank: rank must be >= 1");
    if (quadrature_nodes < 1)
        throw std::invalid_argument("kernel bank: need at least one quadrature node");
    if (trunc_factor < 3.0)
        throw std::invalid_argument("kernel bank: truncation factor below 3 loses too much mass");

    KernelBank bank;
    bank.sigma = sigma;
    bank.rank = rank;
    bank.bins.resize(static_cast<std::size_t>(sigma.bins()));

    for (int k = 0; k < sigma.bins(); ++k) {
        BinKernel& bin = bank.bins[static_cast<std::size_t>(k)];
        const double lo = sigma.edges[static_cast<std::size_t>(k)];
        const double hi = sigma.edges[static_cast<std::size_t>(k) + 1];
        bin.width = hi - lo;
        bin.radius = static_cast<int>(std::ceil(trunc_factor * hi));
        const int side = 2 * bin.radius + 1;
        if (rank > side)
            throw std::invalid_argument("kernel bank: rank exceeds kernel dimension");

        // Midpoint-rule average over the bin. Each node's 2D Gaussian is the
        // outer product of its 1D samples, so the average is symmetric PSD.
        bin.full = Tensor2(side, side, 0.0);
        for (int i = 1; i <= quadrature_nodes; ++i) {
            const double s = lo + (i - 0.5) * (hi - lo) / quadrature_nodes;
            const auto f = sampled_gaussian_1d(s, bin.radius);
            // f[a]*f[b] commutes bitwise, keeping the matrix transpose-exact.
            for (int a = 0; a < side; ++a) {
                const double fa = f[static_cast<std::size_t>(a)];
                for (int b = 0; b < side; ++b)
                    bin.full.at(a, b) += fa * f[static_cast<std::size_t>(b)] / quadrature_nodes;
            }
        }

        // Symmetric PSD, so the eigendecomposition is the SVD.
        Eigen::MatrixXd h(side, side);
        for (int a = 0; a < side; ++a)
            for (int b = 0; b < side; ++b) h(a, b) = bin.full.at(a, b);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("kernel bank: eigendecomposition failed");

        bin.singular_values.resize(static_cast<std::size_t>(side));
        for (int j = 0; j < side; ++j)
            bin.singular_values[static_cast<std::size_t>(j)] =
                std::max(eig.eigenvalues()(side - 1 - j), 0.0);

        bin.factors.resize(static_cast<std::size_t>(rank));
        for (int j = 0; j < rank; ++j) {
            SeparableFactor& fac = bin.factors[static_cast<std::size_t>(j)];
            fac.s = bin.singular_values[static_cast<std::size_t>(j)];
            fac.u.resize(static_cast<std::size_t>(side));
            for (int a = 0; a < side; ++a)
                fac.u[static_cast<std::size_t>(a)] = eig.eigenvectors()(a, side - 1 - j);
            snap_palindrome(fac.u);
            fac.v = fac.u;
        }
    }
    return bank;
}

ImageGrid forward(const KernelBank& bank, const PsdrStack& a, Approx approx) {
    if (a.bins() != bank.count())
        throw std::invalid_argument("forward: stack bins do not match kernel bank");
    ImageGrid out;
    out.data = Tensor2(a.rows(), a.cols(), 0.0);
    Tensor2 plane(a.rows(), a.cols());
    Tensor2 tmp(a.rows(), a.cols());
    for (int k = 0; k < bank.count(); ++k) {
        const BinKernel& bin = bank.bins[static_cast<std::size_t>(k)];
        std::copy(a.coeffs.plane(k), a.coeffs.plane(k) + plane.size(), plane.data());
        apply_bin(bin, approx, plane, out.data, tmp, std::sqrt(bin.width));
    }
    return out;
}

PsdrStack adjoint(const KernelBank& bank, const ImageGrid& d, const WeightMaps& weights,
                  Approx approx) {
    if (!d.data.same_shape(weights.w2))
        throw std::invalid_argument("adjoint: image and weight shapes differ");
    PsdrStack out;
    out.sigma = bank.sigma;
    out.coeffs = Tensor3(bank.count(), d.rows(), d.cols(), 0.0);

    Tensor2 win(d.rows(), d.cols());
    for (std::size_t i = 0; i < win.size(); ++i)
        win.data()[i] = weights.w2.data()[i] * d.data.data()[i];

    Tensor2 plane(d.rows(), d.cols());
    Tensor2 tmp(d.rows(), d.cols());
    for (int k = 0; k < bank.count(); ++k) {
        const BinKernel& bin = bank.bins[static_cast<std::size_t>(k)];
        std::fill(plane.vec().begin(), plane.vec().end(), 0.0);
        // Kernels are exact palindromes, so correlation is its own transpose.
        apply_bin(bin, approx, win, plane, tmp, std::sqrt(bin.width));
        double* dst = out.coeffs.plane(k);
        for (std::size_t i = 0; i < plane.size(); ++i)
            dst[i] = weights.mu.data()[i] * plane.data()[i];
    }
    return out;
}

double op_norm_sq(const KernelBank& bank, const WeightMaps& weights, Approx approx,
                  int iters, std::uint64_t seed) {
    if (iters < 10) throw std::invalid_argument("op_norm_sq: need at least 10 iterations");
    const int rows = weights.w2.rows(), cols = weights.w2.cols();
    const CounterRng rng(seed);

    PsdrStack v;
    v.sigma = bank.sigma;
    v.coeffs = Tensor3(bank.count(), rows, cols);
    std::uint64_t draw = 0;
    auto randomize = [&] {
        for (std::size_t i = 0; i < v.coeffs.size(); ++i)
            v.coeffs.vec()[i] = (rng.uniform(draw++) - 0.5) * weights.mu.data()[i % (static_cast<std::size_t>(rows) * cols)];
    };
    randomize();

    double best = 0.0;
    for (int it = 0; it < iters; ++it) {
        double vv = 0.0;
        for (double x : v.coeffs.vec()) vv += x * x;
        if (vv == 0.0) {
            randomize();
            continue;
        }
        const PsdrStack w = adjoint(bank, forward(bank, v, approx), weights, approx);
        double vw = 0.0, ww = 0.0;
        for (std::size_t i = 0; i < v.coeffs.size(); ++i) {
            vw += v.coeffs.vec()[i] * w.coeffs.vec()[i];
            ww += w.coeffs.vec()[i] * w.coeffs.vec()[i];
        }
        best = std::max(best, vw / vv);
        if (ww == 0.0) {
            randomize();
            continue;
        }
        const double inv = 1.0 / std::sqrt(ww);
        for (std::size_t i = 0; i < v.coeffs.size(); ++i)
            v.coeffs.vec()[i] = w.coeffs.vec()[i] * inv;
    }
    return best;
}

double op_norm_sq_bound(const KernelBank& bank, const WeightMaps& weights, Approx approx) {
    double wmax = 0.0;
    for (double x : weights.w2.vec()) wmax = std::max(wmax, x);
    double total = 0.0;
    for (const auto& bin : bank.bins) {
        double abs_sum = 0.0;
        const int side = 2 * bin.radius + 1;
        if (approx == Approx::full) {
            for (double x : bin.full.vec()) abs_sum += std::abs(x);
        } else {
            for (int a = 0; a < side; ++a)
                for (int b = 0; b < side; ++b) {
                    double e = 0.0;
                    for (const auto& f : bin.factors)
                        e += f.s * f.u[static_cast<std::size_t>(a)] *
                             f.v[static_cast<std::size_t>(b)];
                    abs_sum += std::abs(e);
                }
        }
        total += bin.width * wmax * abs_sum * abs_sum;
    }
    return total;
}

std::vector<double> integrated_gaussian_1d(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("blur: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> taps(2 * static_cast<std::size_t>(radius) + 1);
    const double inv = 1.0 / (sigma * std::sqrt(2.0));
    double sum = 0.0;
    for (int t = 0; t <= radius; ++t) {
        const double v = 0.5 * (std::erf((t + 0.5) * inv) - std::erf((t - 0.5) * inv));
        taps[static_cast<std::size_t>(radius + t)] = v;
        taps[static_cast<std::size_t>(radius - t)] = v;
        sum += t == 0 ? v : 2.0 * v;
    }
    for (double& v : taps) v /= sum;
    return taps;
}

Tensor2 separable_blur(const Tensor2& in, const std::vector<double>& taps) {
    Tensor2 tmp(in.rows(), in.cols());
    Tensor2 out(in.rows(), in.cols());
    correlate_axis(taps, in, tmp, 1.0, false, /*rows_axis=*/false);
    correlate_axis(taps, tmp, out, 1.0, false, /*rows_axis=*/true);
    return out;
}

} // namespace invdiff
