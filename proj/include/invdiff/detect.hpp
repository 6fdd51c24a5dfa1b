#pragma once

#include <string>
#include <vector>

#include "invdiff/tensor.hpp"

namespace invdiff {

struct Detection {
    int row = 0;
    int col = 0;
    double p = 0.0; // pseudo-likelihood
};

/// Detections sorted by p descending, ties broken row-major.
using DetectionList = std::vector<Detection>;

struct PixelPos {
    int row = 0;
    int col = 0;
};

struct MatchReport {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double pre = 0.0;
    double rec = 0.0;
    double f1 = 0.0;
    double tolerance = 0.0; // match radius in pixels
    double delta = 0.0;     // pseudo-likelihood threshold applied
};

struct SweepPoint {
    double delta = 0.0;
    double f1 = 0.0;
};

/// Per-pixel Euclidean norm of the aleph fiber.
ImageGrid pseudo_likelihood(const PsdrStack& a);

/// Regional maxima under 8-connectivity: an equal-valued plateau qualifies
/// when no in-image neighbor of any of its pixels is strictly greater, and
/// contributes its lexicographically smallest pixel. Entries with
/// p <= min_value (or p <= 0) are dropped.
DetectionList local_maxima(const ImageGrid& p, double min_value = 0.0);

/// Walks detections in decreasing p; each one matches the closest still
/// unmatched truth within `radius` (ties by truth order) or counts as a
/// false positive. Unmatched truths are false negatives.
MatchReport greedy_match(const DetectionList& dets, const std::vector<PixelPos>& truth,
                         double radius);

struct SweepResult {
    double best_delta = 0.0;
    MatchReport report;
    std::vector<SweepPoint> curve;
};

/// Evaluates every candidate threshold (0 plus each distinct p), keeping
/// detections with p > delta; returns the F1-maximizing delta, preferring
/// the larger one on ties.
SweepResult sweep_threshold(const DetectionList& dets, const std::vector<PixelPos>& truth,
                            double radius);

std::string detections_to_csv(const DetectionList& dets);
DetectionList detections_from_csv(const std::string& text);
std::string report_to_json(const MatchReport& r);

} // namespace invdiff
