#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "invdiff/emd.hpp"
#include "invdiff/rng.hpp"
#include "oracles.hpp"

using namespace invdiff;

namespace {

SpatialDistribution dist_of(std::vector<PixelPos> support, std::vector<double> mass) {
    SpatialDistribution d;
    d.support = std::move(support);
    d.mass = std::move(mass);
    d.total = 0.0;
    for (double m : d.mass) d.total += m;
    return d;
}

/// Random balanced instance with unique integer positions.
std::pair<SpatialDistribution, SpatialDistribution> random_instance(std::uint64_t seed,
                                                                    int m, int n) {
    const CounterRng rng(seed);
    std::uint64_t draw = 0;
    auto unique_positions = [&](int count) {
        std::vector<PixelPos> pos;
        while (static_cast<int>(pos.size()) < count) {
            PixelPos p{static_cast<int>(rng.uniform(draw++) * 20),
                       static_cast<int>(rng.uniform(draw++) * 20)};
            bool dup = false;
            for (const auto& q : pos) dup = dup || (q.row == p.row && q.col == p.col);
            if (!dup) pos.push_back(p);
        }
        return pos;
    };
    std::vector<double> ma(static_cast<std::size_t>(m)), mb(static_cast<std::size_t>(n));
    double sa = 0.0, sb = 0.0;
    for (auto& v : ma) {
        v = 0.1 + rng.uniform(draw++);
        sa += v;
    }
    for (auto& v : mb) {
        v = 0.1 + rng.uniform(draw++);
        sb += v;
    }
    for (auto& v : mb) v *= sa / sb; // balance exactly
    return {dist_of(unique_positions(m), ma), dist_of(unique_positions(n), mb)};
}

} // namespace

TEST_CASE("stack to spatial distribution") {
    SigmaGrid sigma;
    sigma.edges = {1.0, 2.0, 4.0};
    sigma.aleph = {0, 1};
    PsdrStack a;
    a.sigma = sigma;
    a.coeffs = Tensor3(2, 8, 8, 0.0);

    SUBCASE("single point mass normalizes to one") {
        a.coeffs.at(0, 3, 4) = 2.0;
        a.coeffs.at(1, 3, 4) = 1.0;
        const SpatialDistribution d = psdr_to_distribution(a, 1.0);
        REQUIRE(d.support.size() == 1);
        CHECK(d.support[0].row == 3);
        CHECK(d.support[0].col == 4);
        CHECK(d.mass[0] == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("two equal cells normalized to 2 get unit masses") {
        a.coeffs.at(0, 1, 1) = 1.5;
        a.coeffs.at(0, 6, 6) = 1.5;
        const SpatialDistribution d = psdr_to_distribution(a, 2.0);
        REQUIRE(d.mass.size() == 2);
        CHECK(d.mass[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(d.mass[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("random stacks renormalize to the requested total") {
        const CounterRng rng(4);
        for (std::size_t i = 0; i < a.coeffs.size(); ++i) a.coeffs.vec()[i] = rng.uniform(i);
        const SpatialDistribution d = psdr_to_distribution(a, 17.5);
        double sum = 0.0;
        for (double m : d.mass) sum += m;
        CHECK(sum == doctest::Approx(17.5).epsilon(1e-12));
    }
    SUBCASE("pruning drops relatively tiny mass") {
        a.coeffs.at(0, 1, 1) = 1.0;
        a.coeffs.at(0, 5, 5) = 1e-12;
        CHECK(psdr_to_distribution(a, 1.0, 1e-8).support.size() == 1);
        CHECK(psdr_to_distribution(a, 1.0, 0.0).support.size() == 2);
    }
    SUBCASE("zero stacks are rejected") {
        CHECK_THROWS_AS(psdr_to_distribution(a, 1.0), std::invalid_argument);
    }
}

TEST_CASE("earth mover's distance basics") {
    SUBCASE("identical distributions: zero distance, diagonal plan") {
        const auto d = dist_of({{0, 0}, {3, 7}, {9, 2}}, {1.0, 2.0, 0.5});
        const EmdResult r = emd(d, d);
        CHECK(r.value <= 1e-12);
        for (const Flow& f : r.plan.flows) CHECK(f.i == f.j);
    }
    SUBCASE("unit mass moved from (0,0) to (3,4) costs exactly 5") {
        const EmdResult r = emd(dist_of({{0, 0}}, {1.0}), dist_of({{3, 4}}, {1.0}));
        CHECK(r.value == 5.0);
        REQUIRE(r.plan.flows.size() == 1);
        CHECK(r.plan.flows[0].amount == 1.0);
    }
    SUBCASE("unbalanced totals and empty supports are rejected") {
        CHECK_THROWS_AS(emd(dist_of({{0, 0}}, {1.0}), dist_of({{1, 1}}, {2.0})),
                        std::invalid_argument);
        CHECK_THROWS_AS(emd(SpatialDistribution{}, dist_of({{1, 1}}, {1.0})),
                        std::invalid_argument);
    }
}

TEST_CASE("simplex optimum matches the exhaustive basis enumeration") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const int m = 1 + static_cast<int>(seed % 4);
        const int n = 1 + static_cast<int>((seed / 4) % 4);
        const auto [from, to] = random_instance(900 + seed, m, n);
        const EmdResult got = emd(from, to);

        std::vector<std::vector<double>> cost(static_cast<std::size_t>(m),
                                              std::vector<double>(static_cast<std::size_t>(n)));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    std::hypot(double(from.support[static_cast<std::size_t>(i)].row -
                                      to.support[static_cast<std::size_t>(j)].row),
                               double(from.support[static_cast<std::size_t>(i)].col -
                                      to.support[static_cast<std::size_t>(j)].col));
        const auto oracle = oracles::enumerate_transport(from.mass, to.mass, cost);
        CHECK(std::abs(got.plan.objective - oracle.objective) <= 1e-9);

        // Plan constraints.
        std::vector<double> row(static_cast<std::size_t>(m), 0.0),
            col(static_cast<std::size_t>(n), 0.0);
        double total = 0.0;
        for (const Flow& f : got.plan.flows) {
            CHECK(f.amount >= 0.0);
            row[static_cast<std::size_t>(f.i)] += f.amount;
            col[static_cast<std::size_t>(f.j)] += f.amount;
            total += f.amount;
        }
        for (int i = 0; i < m; ++i)
            CHECK(row[static_cast<std::size_t>(i)] <=
                  from.mass[static_cast<std::size_t>(i)] + 1e-9);
        for (int j = 0; j < n; ++j)
            CHECK(col[static_cast<std::size_t>(j)] <= to.mass[static_cast<std::size_t>(j)] + 1e-9);
        CHECK(total == doctest::Approx(from.total).epsilon(1e-9));

        // Complementary slackness against the oracle's optimal duals.
        for (const Flow& f : got.plan.flows)
            if (f.amount > 1e-9)
                CHECK(std::abs(oracle.u[static_cast<std::size_t>(f.i)] +
                               oracle.v[static_cast<std::size_t>(f.j)] -
                               cost[static_cast<std::size_t>(f.i)][static_cast<std::size_t>(f.j)]) <=
                      1e-9);
    }
}

TEST_CASE("metric behavior") {
    SUBCASE("symmetry and triangle inequality on random triples") {
        for (std::uint64_t seed = 0; seed < 15; ++seed) {
            auto [p, q] = random_instance(40 + seed, 3, 4);
            auto [r_, unused] = random_instance(140 + seed, 4, 2);
            // Rebalance r_ to the same total as p.
            for (auto& v : r_.mass) v *= p.total / r_.total;
            r_.total = 0.0;
            for (double v : r_.mass) r_.total += v;

            const double pq = emd(p, q).value;
            const double qp = emd(q, p).value;
            CHECK(std::abs(pq - qp) <= 1e-9);
            const double pr = emd(p, r_).value;
            const double qr = emd(q, r_).value;
            CHECK(pr <= pq + qr + 1e-8);
        }
    }
    SUBCASE("translation covariance is exact") {
        auto [p, q] = random_instance(9, 3, 3);
        const double before = emd(p, q).value;
        for (auto& s : p.support) {
            s.row += 11;
            s.col -= 4;
        }
        for (auto& s : q.support) {
            s.row += 11;
            s.col -= 4;
        }
        CHECK(emd(p, q).value == before);
    }
}

TEST_CASE("emd serialization") {
    const auto from = dist_of({{0, 0}}, {1.0});
    const auto to = dist_of({{3, 4}}, {1.0});
    const EmdResult r = emd(from, to);
    const std::string json = emd_to_json(r, from, to);
    CHECK(json.find("\"emd_pixels\": 5.0") != std::string::npos);
    CHECK(json.find("\"support_sizes\"") != std::string::npos);
    const std::string csv = plan_to_csv(r.plan, from, to);
    CHECK(csv.rfind("i_row,i_col,j_row,j_col,flow\n", 0) == 0);
    CHECK(csv.find("0,0,3,4,1\n") != std::string::npos);
}
