#include "invdiff/emd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>

#include <json.hpp>

namespace invdiff {

SpatialDistribution psdr_to_distribution(const PsdrStack& a, double normalize_to,
                                         double prune_eps) {
    if (!(normalize_to > 0.0))
        throw std::invalid_argument("distribution: normalize_to must be positive");
    if (prune_eps < 0.0) throw std::invalid_argument("distribution: prune_eps must be >= 0");

    const std::size_t pixels = static_cast<std::size_t>(a.rows()) * a.cols();
    const double* base = a.coeffs.data();
    std::vector<double> mass(pixels, 0.0);
    double peak = 0.0;
    for (int k = 0; k < a.bins(); ++k) {
        const double w = std::sqrt(a.sigma.width(k));
        for (std::size_t p = 0; p < pixels; ++p)
            mass[p] += w * base[static_cast<std::size_t>(k) * pixels + p];
    }
    for (double m : mass) peak = std::max(peak, m);
    if (!(peak > 0.0)) throw std::invalid_argument("distribution: stack has no positive mass");

    SpatialDistribution out;
    double kept = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
        if (mass[p] <= 0.0 || mass[p] < prune_eps * peak) continue;
        out.support.push_back({static_cast<int>(p) / a.cols(), static_cast<int>(p) % a.cols()});
        out.mass.push_back(mass[p]);
        kept += mass[p];
    }
    const double scale = normalize_to / kept;
    out.total = 0.0;
    for (double& m : out.mass) {
        m *= scale;
        out.total += m;
    }
    return out;
}

namespace {

struct Cell {
    int i = 0;
    int j = 0;
};

double distance(const PixelPos& a, const PixelPos& b) {
    const double dr = a.row - b.row;
    const double dc = a.col - b.col;
    return std::sqrt(dr * dr + dc * dc);
}

/// Spanning-tree basis of the transportation tableau with adjacency lists
/// over the bipartite row/column nodes.
struct Basis {
    int m = 0, n = 0;
    std::vector<std::vector<int>> row_adj; // row i -> basic columns
    std::vector<std::vector<int>> col_adj; // col j -> basic rows
    std::vector<double> flow;              // m*n dense; only basic cells used

    double& f(int i, int j) { return flow[static_cast<std::size_t>(i) * n + j]; }
    double f(int i, int j) const { return flow[static_cast<std::size_t>(i) * n + j]; }

    void add(int i, int j, double amount) {
        row_adj[static_cast<std::size_t>(i)].push_back(j);
        col_adj[static_cast<std::size_t>(j)].push_back(i);
        f(i, j) = amount;
    }
    void remove(int i, int j) {
        auto& r = row_adj[static_cast<std::size_t>(i)];
        r.erase(std::find(r.begin(), r.end(), j));
        auto& c = col_adj[static_cast<std::size_t>(j)];
        c.erase(std::find(c.begin(), c.end(), i));
        f(i, j) = 0.0;
    }
    bool is_basic(int i, int j) const {
        const auto& r = row_adj[static_cast<std::size_t>(i)];
        return std::find(r.begin(), r.end(), j) != r.end();
    }
};

/// Dual potentials u, v with u[0] = 0, solving u_i + v_j = c_ij on the tree.
void potentials(const Basis& basis, const std::vector<PixelPos>& src,
                const std::vector<PixelPos>& dst, std::vector<double>& u,
                std::vector<double>& v) {
    const int m = basis.m, n = basis.n;
    u.assign(static_cast<std::size_t>(m), 0.0);
    v.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<char> useen(static_cast<std::size_t>(m), 0), vseen(static_cast<std::size_t>(n), 0);
    std::deque<int> queue; // rows as i, cols as m + j
    useen[0] = 1;
    queue.push_back(0);
    while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        if (node < m) {
            for (int j : basis.row_adj[static_cast<std::size_t>(node)]) {
                if (vseen[static_cast<std::size_t>(j)]) continue;
                vseen[static_cast<std::size_t>(j)] = 1;
                v[static_cast<std::size_t>(j)] =
                    distance(src[static_cast<std::size_t>(node)], dst[static_cast<std::size_t>(j)]) -
                    u[static_cast<std::size_t>(node)];
                queue.push_back(m + j);
            }
        } else {
            const int j = node - m;
            for (int i : basis.col_adj[static_cast<std::size_t>(j)]) {
                if (useen[static_cast<std::size_t>(i)]) continue;
                useen[static_cast<std::size_t>(i)] = 1;
                u[static_cast<std::size_t>(i)] =
                    distance(src[static_cast<std::size_t>(i)], dst[static_cast<std::size_t>(j)]) -
                    v[static_cast<std::size_t>(j)];
                queue.push_back(i);
            }
        }
    }
    for (char s : useen)
        if (!s) throw std::runtime_error("emd: basis tree is disconnected");
    for (char s : vseen)
        if (!s) throw std::runtime_error("emd: basis tree is disconnected");
}

/// Unique tree path from row `ie` to col `je`, returned as the cycle cells
/// in order (entering cell first).
std::vector<Cell> find_cycle(const Basis& basis, int ie, int je) {
    const int m = basis.m;
    // parent[node] = (prev node) with nodes 0..m-1 rows, m..m+n-1 cols.
    std::vector<int> parent(static_cast<std::size_t>(m + basis.n), -2);
    std::deque<int> queue;
    parent[static_cast<std::size_t>(ie)] = -1;
    queue.push_back(ie);
    while (!queue.empty()) {
        const int node = queue.front();
        queue.pop_front();
        if (node == m + je) break;
        if (node < m) {
            for (int j : basis.row_adj[static_cast<std::size_t>(node)]) {
                if (parent[static_cast<std::size_t>(m + j)] != -2) continue;
                parent[static_cast<std::size_t>(m + j)] = node;
                queue.push_back(m + j);
            }
        } else {
            for (int i : basis.col_adj[static_cast<std::size_t>(node - m)]) {
                if (parent[static_cast<std::size_t>(i)] != -2) continue;
                parent[static_cast<std::size_t>(i)] = node;
                queue.push_back(i);
            }
        }
    }
    if (parent[static_cast<std::size_t>(m + je)] == -2)
        throw std::runtime_error("emd: no tree path for the entering cell");

    std::vector<int> nodes;
    for (int node = m + je; node != -1; node = parent[static_cast<std::size_t>(node)])
        nodes.push_back(node);
    std::reverse(nodes.begin(), nodes.end()); // ie ... je

    std::vector<Cell> cycle;
    cycle.push_back({ie, je}); // entering edge closes the loop
    for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
        const int a = nodes[s], b = nodes[s + 1];
        cycle.push_back(a < m ? Cell{a, b - m} : Cell{b, a - m});
    }
    return cycle;
}

/// Exact flows for a given basis tree and right-hand sides, by leaf
/// elimination. Degenerate cells come out as (tiny) zeros.
std::vector<double> tree_flows(const Basis& basis, std::vector<double> supply,
                               std::vector<double> demand) {
    const int m = basis.m, n = basis.n;
    std::vector<std::vector<int>> radj = basis.row_adj, cadj = basis.col_adj;
    std::vector<double> flow(static_cast<std::size_t>(m) * n, 0.0);
    std::deque<int> leaves;
    auto degree = [&](int node) {
        return node < m ? radj[static_cast<std::size_t>(node)].size()
                        : cadj[static_cast<std::size_t>(node - m)].size();
    };
    for (int node = 0; node < m + n; ++node)
        if (degree(node) == 1) leaves.push_back(node);

    int processed = 0;
    while (!leaves.empty()) {
        const int node = leaves.front();
        leaves.pop_front();
        if (degree(node) == 0) continue;
        ++processed;
        int i, j;
        if (node < m) {
            i = node;
            j = radj[static_cast<std::size_t>(node)].front();
        } else {
            j = node - m;
            i = cadj[static_cast<std::size_t>(j)].front();
        }
        const double amount = node < m ? supply[static_cast<std::size_t>(i)]
                                       : demand[static_cast<std::size_t>(j)];
        flow[static_cast<std::size_t>(i) * n + j] = amount;
        supply[static_cast<std::size_t>(i)] -= amount;
        demand[static_cast<std::size_t>(j)] -= amount;
        auto& r = radj[static_cast<std::size_t>(i)];
        r.erase(std::find(r.begin(), r.end(), j));
        auto& c = cadj[static_cast<std::size_t>(j)];
        c.erase(std::find(c.begin(), c.end(), i));
        const int other = node < m ? m + j : i;
        if (degree(other) == 1) leaves.push_back(other);
    }
    if (processed != m + n - 1) throw std::runtime_error("emd: basis is not a spanning tree");
    return flow;
}

} // namespace

EmdResult emd(const SpatialDistribution& from, const SpatialDistribution& to) {
    if (from.support.empty() || to.support.empty())
        throw std::invalid_argument("emd: empty support");
    const double total = from.total;
    if (std::abs(from.total - to.total) > 1e-6 * std::max(from.total, to.total))
        throw std::invalid_argument("emd: totals differ; normalize both distributions first");

    const int m = static_cast<int>(from.support.size());
    const int n = static_cast<int>(to.support.size());

    // Perturbed right-hand sides keep every basis nondegenerate; the true
    // flows are recomputed on the final tree afterwards.
    const double eps = 1e-12 * total;
    std::vector<double> supply(from.mass), demand(to.mass);
    for (double& s : supply) s += eps;
    double ssum = 0.0;
    for (double s : supply) ssum += s;
    double dhead = 0.0;
    for (int j = 0; j + 1 < n; ++j) dhead += demand[static_cast<std::size_t>(j)];
    demand[static_cast<std::size_t>(n - 1)] = ssum - dhead; // exact balance

    Basis basis;
    basis.m = m;
    basis.n = n;
    basis.row_adj.assign(static_cast<std::size_t>(m), {});
    basis.col_adj.assign(static_cast<std::size_t>(n), {});
    basis.flow.assign(static_cast<std::size_t>(m) * n, 0.0);

    // Northwest-corner start.
    {
        std::vector<double> s = supply, d = demand;
        int i = 0, j = 0;
        while (i < m && j < n) {
            const double amount = std::min(s[static_cast<std::size_t>(i)],
                                           d[static_cast<std::size_t>(j)]);
            basis.add(i, j, amount);
            s[static_cast<std::size_t>(i)] -= amount;
            d[static_cast<std::size_t>(j)] -= amount;
            if (i == m - 1 && j == n - 1) break;
            if (s[static_cast<std::size_t>(i)] <= d[static_cast<std::size_t>(j)] && i < m - 1)
                ++i;
            else
                ++j;
        }
    }

    const double enter_tol = 1e-10;
    std::vector<double> u, v;
    const long max_pivots = 1000L * (m + n) + 10000L;
    for (long pivot = 0;; ++pivot) {
        if (pivot > max_pivots) throw std::runtime_error("emd: pivot limit exceeded");
        potentials(basis, from.support, to.support, u, v);

        // First cell with negative reduced cost, scanned row-major.
        int ie = -1, je = -1;
        for (int i = 0; i < m && ie < 0; ++i) {
            for (int j = 0; j < n; ++j) {
                if (basis.is_basic(i, j)) continue;
                const double rc = distance(from.support[static_cast<std::size_t>(i)],
                                           to.support[static_cast<std::size_t>(j)]) -
                                  u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)];
                if (rc < -enter_tol) {
                    ie = i;
                    je = j;
                    break;
                }
            }
        }
        if (ie < 0) break;

        const std::vector<Cell> cycle = find_cycle(basis, ie, je);
        // Odd positions in the cycle give mass back.
        double theta = 0.0;
        int leave = -1;
        bool first = true;
        for (std::size_t s = 1; s < cycle.size(); s += 2) {
            const double f = basis.f(cycle[s].i, cycle[s].j);
            if (first || f < theta) {
                theta = f;
                leave = static_cast<int>(s);
                first = false;
            }
        }
        if (leave < 0) throw std::runtime_error("emd: malformed pivot cycle");

        for (std::size_t s = 1; s < cycle.size(); ++s) {
            double& f = basis.f(cycle[s].i, cycle[s].j);
            f += (s % 2 == 1) ? -theta : theta;
        }
        basis.remove(cycle[static_cast<std::size_t>(leave)].i,
                     cycle[static_cast<std::size_t>(leave)].j);
        basis.add(ie, je, theta);
    }

    // True flows on the optimal tree, from the unperturbed masses.
    const std::vector<double> flow = tree_flows(basis, from.mass, to.mass);

    EmdResult res;
    for (int i = 0; i < m; ++i) {
        for (int j : basis.row_adj[static_cast<std::size_t>(i)]) {
            double f = flow[static_cast<std::size_t>(i) * n + j];
            if (f < 0.0) {
                if (f < -1e-6 * total) throw std::runtime_error("emd: negative flow on basis");
                f = 0.0;
            }
            if (f > 0.0) res.plan.flows.push_back({i, j, f});
            res.plan.objective +=
                f * distance(from.support[static_cast<std::size_t>(i)],
                             to.support[static_cast<std::size_t>(j)]);
        }
    }
    res.value = res.plan.objective / total;

    // Certify: duals of the final basis must price out every pair.
    potentials(basis, from.support, to.support, u, v);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double c = distance(from.support[static_cast<std::size_t>(i)],
                                      to.support[static_cast<std::size_t>(j)]);
            if (u[static_cast<std::size_t>(i)] + v[static_cast<std::size_t>(j)] > c + 1e-9)
                throw std::runtime_error("emd: optimality certificate failed");
        }
    return res;
}

std::string emd_to_json(const EmdResult& r, const SpatialDistribution& from,
                        const SpatialDistribution& to) {
    nlohmann::json j;
    j["emd_pixels"] = r.value;
    j["total_mass"] = from.total;
    j["support_sizes"] = {from.support.size(), to.support.size()};
    return j.dump(2) + "\n";
}

std::string plan_to_csv(const TransportPlan& plan, const SpatialDistribution& from,
                        const SpatialDistribution& to) {
    std::string out = "i_row,i_col,j_row,j_col,flow\n";
    char buf[160];
    for (const Flow& f : plan.flows) {
        const PixelPos& a = from.support[static_cast<std::size_t>(f.i)];
        const PixelPos& b = to.support[static_cast<std::size_t>(f.j)];
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%.17g\n", a.row, a.col, b.row, b.col,
                      f.amount);
        out += buf;
    }
    return out;
}

} // namespace invdiff
