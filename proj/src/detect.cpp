#include "invdiff/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace invdiff {

ImageGrid pseudo_likelihood(const PsdrStack& a) {
    if (a.sigma.aleph.empty())
        throw std::invalid_argument("pseudo_likelihood: aleph is empty");
    ImageGrid out;
    out.data = Tensor2(a.rows(), a.cols());
    const std::size_t pixels = out.data.size();
    const double* base = a.coeffs.data();
    for (std::size_t p = 0; p < pixels; ++p) {
        double s = 0.0;
        for (int k : a.sigma.aleph) {
            const double c = base[static_cast<std::size_t>(k) * pixels + p];
            s += c * c;
        }
        out.data.data()[p] = std::sqrt(s);
    }
    return out;
}

DetectionList local_maxima(const ImageGrid& img, double min_value) {
    const int rows = img.rows(), cols = img.cols();
    const Tensor2& p = img.data;
    std::vector<char> visited(p.size(), 0);
    DetectionList dets;

    std::vector<int> stack;
    for (int m0 = 0; m0 < rows; ++m0) {
        for (int n0 = 0; n0 < cols; ++n0) {
            const int id0 = m0 * cols + n0;
            if (visited[static_cast<std::size_t>(id0)]) continue;
            const double v = p.at(m0, n0);
            if (!(v > 0.0) || v <= min_value) continue;

            // Flood-fill the equal-valued plateau; reject it as soon as a
            // strictly greater neighbor appears.
            bool is_max = true;
            int rep_row = m0, rep_col = n0;
            stack.assign(1, id0);
            visited[static_cast<std::size_t>(id0)] = 1;
            while (!stack.empty()) {
                const int id = stack.back();
                stack.pop_back();
                const int m = id / cols, n = id % cols;
                if (m < rep_row || (m == rep_row && n < rep_col)) {
                    rep_row = m;
                    rep_col = n;
                }
                for (int dm = -1; dm <= 1; ++dm) {
                    for (int dn = -1; dn <= 1; ++dn) {
                        if (dm == 0 && dn == 0) continue;
                        const int mm = m + dm, nn = n + dn;
                        if (mm < 0 || mm >= rows || nn < 0 || nn >= cols) continue;
                        const double w = p.at(mm, nn);
                        if (w > v) {
                            is_max = false;
                        } else if (w == v) {
                            const int nid = mm * cols + nn;
                            if (!visited[static_cast<std::size_t>(nid)]) {
                                visited[static_cast<std::size_t>(nid)] = 1;
                                stack.push_back(nid);
                            }
                        }
                    }
                }
            }
            if (is_max) dets.push_back({rep_row, rep_col, v});
        }
    }

    std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        if (a.p != b.p) return a.p > b.p;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });
    return dets;
}

MatchReport greedy_match(const DetectionList& dets, const std::vector<PixelPos>& truth,
                         double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("greedy_match: radius must be positive");
    std::vector<char> used(truth.size(), 0);
    MatchReport r;
    r.tolerance = radius;
    for (const Detection& d : dets) {
        int best = -1;
        double best_dist = radius;
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (used[t]) continue;
            const double dr = d.row - truth[t].row;
            const double dc = d.col - truth[t].col;
            const double dist = std::sqrt(dr * dr + dc * dc);
            if (dist <= best_dist && (best < 0 || dist < best_dist)) {
                best = static_cast<int>(t);
                best_dist = dist;
            }
        }
        if (best >= 0) {
            used[static_cast<std::size_t>(best)] = 1;
            ++r.tp;
        } else {
            ++r.fp;
        }
    }
    r.fn = static_cast<int>(truth.size()) - r.tp;
    r.pre = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
    r.rec = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
    r.f1 = r.pre + r.rec > 0.0 ? 2.0 * r.pre * r.rec / (r.pre + r.rec) : 0.0;
    return r;
}

SweepResult sweep_threshold(const DetectionList& dets, const std::vector<PixelPos>& truth,
                            double radius) {
    std::vector<double> candidates{0.0};
    for (const Detection& d : dets) candidates.push_back(d.p);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    SweepResult out;
    bool have = false;
    for (double delta : candidates) {
        DetectionList kept;
        for (const Detection& d : dets)
            if (d.p > delta) kept.push_back(d);
        MatchReport r = greedy_match(kept, truth, radius);
        r.delta = delta;
        out.curve.push_back({delta, r.f1});
        // Ties go to the larger delta, i.e., the sparser detection set.
        if (!have || r.f1 >= out.report.f1) {
            out.best_delta = delta;
            out.report = r;
            have = true;
        }
    }
    return out;
}

std::string detections_to_csv(const DetectionList& dets) {
    std::string out = "rank,row,col,p\n";
    char buf[128];
    for (std::size_t i = 0; i < dets.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.17g\n", i + 1, dets[i].row, dets[i].col,
                      dets[i].p);
        out += buf;
    }
    return out;
}

DetectionList detections_from_csv(const std::string& text) {
    DetectionList dets;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("rank,row,col,p", 0) != 0)
        throw std::runtime_error("detections CSV: missing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Detection d;
        unsigned long rank = 0;
        if (std::sscanf(line.c_str(), "%lu,%d,%d,%lg", &rank, &d.row, &d.col, &d.p) != 4)
            throw std::runtime_error("detections CSV: malformed row '" + line + "'");
        dets.push_back(d);
    }
    return dets;
}

std::string report_to_json(const MatchReport& r) {
    nlohmann::json j;
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["pre"] = r.pre;
    j["rec"] = r.rec;
    j["f1"] = r.f1;
    j["delta"] = r.delta;
    j["tolerance"] = r.tolerance;
    return j.dump(2) + "\n";
}

} // namespace invdiff
