#pragma once

#include <string>
#include <vector>

#include "invdiff/detect.hpp"
#include "invdiff/tensor.hpp"

namespace invdiff {

struct SpatialDistribution {
    std::vector<PixelPos> support;
    std::vector<double> mass; // positive, co-indexed with support
    double total = 0.0;
};

struct Flow {
    int i = 0; // index into the source support
    int j = 0; // index into the target support
    double amount = 0.0;
};

struct TransportPlan {
    std::vector<Flow> flows;
    double objective = 0.0; // mass times distance, before dividing by total
};

struct EmdResult {
    double value = 0.0; // pixels: objective / total mass
    TransportPlan plan;
};

/// Collapses a stack to per-pixel masses sum_k sqrt(width_k) * coeffs[k],
/// drops entries below prune_eps times the largest one, and rescales the
/// rest to sum to normalize_to.
SpatialDistribution psdr_to_distribution(const PsdrStack& a, double normalize_to,
                                         double prune_eps = 1e-8);

/// Exact optimum of the balanced transportation problem with Euclidean pixel
/// costs, solved by the transportation simplex (northwest-corner start, MODI
/// pricing, first-negative entering rule, epsilon-perturbed supplies against
/// degeneracy). The returned plan's optimality is certified internally by
/// dual feasibility. Requires totals equal within 1e-6 relative.
EmdResult emd(const SpatialDistribution& from, const SpatialDistribution& to);

std::string emd_to_json(const EmdResult& r, const SpatialDistribution& from,
                        const SpatialDistribution& to);
std::string plan_to_csv(const TransportPlan& plan, const SpatialDistribution& from,
                        const SpatialDistribution& to);

} // namespace invdiff
