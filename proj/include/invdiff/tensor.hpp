#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace invdiff {

/// Dense M x N array of doubles, row-major.
class Tensor2 {
public:
    Tensor2() = default;
    Tensor2(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols),
          v_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
        assert(rows >= 0 && cols >= 0);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }

    double& at(int m, int n) { return v_[idx(m, n)]; }
    double at(int m, int n) const { return v_[idx(m, n)]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

    bool same_shape(const Tensor2& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t idx(int m, int n) const {
        assert(m >= 0 && m < rows_ && n >= 0 && n < cols_);
        return static_cast<std::size_t>(m) * static_cast<std::size_t>(cols_) +
               static_cast<std::size_t>(n);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

/// Dense K x M x N array of doubles; k slowest, n fastest.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(int planes, int rows, int cols, double fill = 0.0)
        : planes_(planes), rows_(rows), cols_(cols),
          v_(static_cast<std::size_t>(planes) * rows * cols, fill) {
        assert(planes >= 0 && rows >= 0 && cols >= 0);
    }

    int planes() const { return planes_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }

    double& at(int k, int m, int n) { return v_[idx(k, m, n)]; }
    double at(int k, int m, int n) const { return v_[idx(k, m, n)]; }

    double* plane(int k) { return v_.data() + idx(k, 0, 0); }
    const double* plane(int k) const { return v_.data() + idx(k, 0, 0); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

    bool same_shape(const Tensor3& o) const {
        return planes_ == o.planes_ && rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t idx(int k, int m, int n) const {
        assert(k >= 0 && k < planes_ && m >= 0 && m < rows_ && n >= 0 && n < cols_);
        return (static_cast<std::size_t>(k) * rows_ + m) * cols_ + n;
    }

    int planes_ = 0;
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

/// Observed image with camera pixel pitch (micrometers). All math is in
/// pixel units; the pitch is carried as metadata.
struct ImageGrid {
    Tensor2 data;
    double pixel_pitch = 1.0;

    int rows() const { return data.rows(); }
    int cols() const { return data.cols(); }
};

/// Discretization of the diffusion-width dimension: K bins with edges
/// sigma_0 < ... < sigma_K (pixel units) and the subset of bins (aleph,
/// 0-based here) that the group-sparsity regularizer acts on.
struct SigmaGrid {
    std::vector<double> edges;
    std::vector<int> aleph;

    int bins() const { return static_cast<int>(edges.size()) - 1; }
    double width(int k) const { return edges[k + 1] - edges[k]; }
    bool in_aleph(int k) const;
};

/// Coefficient stack of the unknown source density over (bin, row, col) in
/// the orthonormal box basis: coeffs[k] ~ width_k^{-1/2} * integral of the
/// density over bin k.
struct PsdrStack {
    Tensor3 coeffs;
    SigmaGrid sigma;

    int bins() const { return coeffs.planes(); }
    int rows() const { return coeffs.rows(); }
    int cols() const { return coeffs.cols(); }
};

/// Pointwise data weights: w2 = squared fidelity weight per pixel, mu = 0/1
/// support mask for the unknown.
struct WeightMaps {
    Tensor2 w2;
    Tensor2 mu;
};

WeightMaps uniform_weights(int rows, int cols);

/// Throws std::invalid_argument on violated invariants.
void validate(const ImageGrid& g);
void validate(const SigmaGrid& g);
void validate(const PsdrStack& s);
void validate(const WeightMaps& w);

bool all_finite(const std::vector<double>& v);

} // namespace invdiff
