#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "invdiff/prox.hpp"
#include "invdiff/prox_check.hpp"
#include "invdiff/prox_oracles.hpp"
#include "invdiff/rng.hpp"

using namespace invdiff;

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo, double hi) {
    const CounterRng rng(seed);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform(i);
    return v;
}

} // namespace

TEST_CASE("ball projection") {
    CHECK(project_ball({3, 4}, 10.0) == std::vector<double>{3, 4});
    const auto shrunk = project_ball({3, 4}, 2.5);
    CHECK(shrunk[0] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(shrunk[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(project_ball({0, 0, 0}, 1.0) == std::vector<double>{0, 0, 0});
    CHECK_THROWS_AS(project_ball({1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("ellipsoid projection") {
    SUBCASE("unit weights reduce to the ball") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto x = random_vec(5, seed, -3, 3);
            const std::vector<double> ones(5, 1.0);
            const double gamma = 0.4 + 0.2 * static_cast<double>(seed);
            CHECK(max_abs_diff(project_ellipsoid(x, ones, gamma).y, project_ball(x, gamma)) <=
                  1e-10);
        }
    }
    SUBCASE("feasible points are fixed with zero multiplier") {
        const std::vector<double> x{0.1, -0.2};
        const auto [y, lambda] = project_ellipsoid(x, {1.0, 2.0}, 1.0);
        CHECK(y == x);
        CHECK(lambda == 0.0);
    }
    SUBCASE("matches the projected-gradient oracle") {
        const std::vector<double> xi{1.0, 2.0};
        const std::vector<double> x{2.0, 2.0};
        const auto got = project_ellipsoid(x, xi, 1.0);
        const auto ref = oracle_project_ellipsoid(x, xi, 1.0);
        CHECK(max_abs_diff(got.y, ref) <= 1e-6);
    }
    SUBCASE("random cases: oracle, KKT, feasibility, support shrinkage") {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const std::size_t dim = 1 + seed % 7;
            auto x = random_vec(dim, 10 * seed + 1, -3, 3);
            if (seed % 5 == 0) x[0] = 0.0;
            const auto xi = random_vec(dim, 10 * seed + 2, 0.3, 2.5);
            const double gamma = 0.2 + 1.5 * (seed % 4) / 3.0;
            const auto [y, lambda] = project_ellipsoid(x, xi, gamma);

            CHECK(max_abs_diff(y, oracle_project_ellipsoid(x, xi, gamma)) <= 1e-6);
            CHECK(lambda >= 0.0);
            double feas = 0.0;
            for (std::size_t i = 0; i < dim; ++i) feas += (y[i] / xi[i]) * (y[i] / xi[i]);
            CHECK(std::sqrt(feas) <= gamma * (1.0 + 1e-9));
            CHECK(std::abs(lambda * (feas - gamma * gamma)) <= 1e-8 * gamma * gamma);
            for (std::size_t i = 0; i < dim; ++i)
                if (x[i] == 0.0) CHECK(y[i] == 0.0);
        }
    }
    SUBCASE("rejects non-finite input and nonpositive weights") {
        CHECK_THROWS_AS(project_ellipsoid({std::nan("")}, {1.0}, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(project_ellipsoid({1.0}, {0.0}, 1.0), std::invalid_argument);
    }
}

TEST_CASE("nonnegative group prox, ball form") {
    const auto y = prox_nonneg_group_ball({-1, 3, 4}, 2.5);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(y[2] == doctest::Approx(2.0).epsilon(1e-14));

    CHECK(prox_nonneg_group_ball({3, 4}, 5.0) == std::vector<double>{0, 0});

    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto x = random_vec(5, 777 + seed, -2, 2);
        const std::vector<double> ones(5, 1.0);
        const auto got = prox_nonneg_group_ball(x, 0.7);
        CHECK(max_abs_diff(got, oracle_min_nonneg_group(x, ones, 0.7)) <= 1e-6);
        for (double v : got) CHECK(v >= 0.0);
    }
}

TEST_CASE("nonnegative group prox, weighted form") {
    SUBCASE("unit weights equal the ball form") {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            const auto x = random_vec(6, 31 * seed, -2, 2);
            const std::vector<double> ones(6, 1.0);
            CHECK(max_abs_diff(prox_nonneg_group_weighted(x, ones, 0.9),
                               prox_nonneg_group_ball(x, 0.9)) <= 1e-10);
        }
    }
    SUBCASE("nonpositive input maps to zero") {
        const auto y = prox_nonneg_group_weighted({-1, -0.5, 0.0}, {1, 2, 3}, 0.4);
        CHECK(y == std::vector<double>{0, 0, 0});
    }
    SUBCASE("matches the direct-minimization oracle") {
        const std::vector<double> xi{1, 2, 4};
        const std::vector<double> x{1, 1, 1};
        const auto got = prox_nonneg_group_weighted(x, xi, 0.3);
        const auto ref = oracle_min_nonneg_group(x, xi, 0.3, /*descent_iters=*/100000);
        CHECK(max_abs_diff(got, ref) <= 1e-6);
    }
    SUBCASE("optimality certificate against random feasible points") {
        const auto x = random_vec(4, 5150, -2, 2);
        const auto xi = random_vec(4, 5151, 0.4, 2.0);
        const double gamma = 0.6;
        const auto y = prox_nonneg_group_weighted(x, xi, gamma);
        const double fy = nonneg_group_objective(y, x, xi, gamma);
        const CounterRng rng(5152);
        for (int c = 0; c < 10000; ++c) {
            std::vector<double> z(4);
            for (std::size_t i = 0; i < 4; ++i)
                z[i] = 3.0 * rng.uniform(static_cast<std::uint64_t>(4 * c) + i);
            CHECK(fy <= nonneg_group_objective(z, x, xi, gamma) + 1e-12);
        }
    }
    SUBCASE("prox equals prox of the positive part, exactly") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto x = random_vec(5, 900 + seed, -2, 2);
            auto xp = x;
            for (double& v : xp) v = std::max(0.0, v);
            const auto xi = random_vec(5, 950 + seed, 0.3, 2.0);
            CHECK(prox_nonneg_group_weighted(x, xi, 0.5) ==
                  prox_nonneg_group_weighted(xp, xi, 0.5));
        }
    }
}

TEST_CASE("conjugate prox and the Moreau decomposition") {
    SUBCASE("nonpositive input is untouched") {
        const std::vector<double> x{-2, -0.3, 0.0};
        CHECK(prox_conjugate(x, {1, 1, 1}, 0.7) == x);
    }
    SUBCASE("positive input projects onto the ball") {
        const auto y = prox_conjugate({3, 4}, {1, 1}, 2.5);
        CHECK(y[0] == doctest::Approx(1.5).epsilon(1e-14));
        CHECK(y[1] == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("decomposition identity on random triples") {
        for (std::uint64_t seed = 0; seed < 60; ++seed) {
            const std::size_t dim = 1 + seed % 8;
            const auto x = random_vec(dim, 3000 + 7 * seed, -3, 3);
            const auto xi = random_vec(dim, 4000 + 7 * seed, 0.2, 3.0);
            const double gamma = 0.05 + 0.4 * static_cast<double>(seed % 6);
            const auto p = prox_nonneg_group_weighted(x, xi, gamma);
            const auto q = prox_conjugate(x, xi, gamma);
            for (std::size_t i = 0; i < dim; ++i)
                CHECK(std::abs(p[i] + q[i] - x[i]) <= 1e-8);
        }
    }
    SUBCASE("prox maps are nonexpansive") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto x = random_vec(5, 7000 + seed, -2, 2);
            const auto y = random_vec(5, 7100 + seed, -2, 2);
            const auto xi = random_vec(5, 7200 + seed, 0.3, 2.0);
            std::vector<double> diff_in(5), diff_out(5);
            const auto px = prox_nonneg_group_weighted(x, xi, 0.618);
            const auto py = prox_nonneg_group_weighted(y, xi, 0.618);
            for (std::size_t i = 0; i < 5; ++i) {
                diff_in[i] = x[i] - y[i];
                diff_out[i] = px[i] - py[i];
            }
            CHECK(norm2(diff_out) <= norm2(diff_in) * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("stack prox") {
    SigmaGrid sigma;
    sigma.edges = {1, 2, 3, 4};
    sigma.aleph = {1, 2};

    auto make = [&](double fill) {
        PsdrStack a;
        a.sigma = sigma;
        a.coeffs = Tensor3(3, 2, 2, fill);
        return a;
    };

    SUBCASE("zero threshold on a nonnegative stack is the identity") {
        PsdrStack a = make(0.25);
        const PsdrStack before = a;
        apply_prox_stack(a, 0.0, {}, ProxMode::ball, nullptr);
        CHECK(a.coeffs.vec() == before.coeffs.vec());
    }
    SUBCASE("nonpositive stacks collapse to zero") {
        PsdrStack a = make(-0.5);
        apply_prox_stack(a, 0.3, {}, ProxMode::ball, nullptr);
        for (double v : a.coeffs.vec()) CHECK(v == 0.0);
    }
    SUBCASE("agrees with per-pixel scalar prox calls") {
        const CounterRng rng(99);
        for (int mode = 0; mode < 2; ++mode) {
            PsdrStack a = make(0.0);
            for (std::size_t i = 0; i < a.coeffs.size(); ++i)
                a.coeffs.vec()[i] = 3.0 * (rng.uniform(i) - 0.4);
            const PsdrStack original = a;
            apply_prox_stack(a, 0.35, {}, mode ? ProxMode::ellipsoid : ProxMode::ball, nullptr);
            for (int m = 0; m < 2; ++m)
                for (int n = 0; n < 2; ++n) {
                    std::vector<double> fiber{original.coeffs.at(1, m, n),
                                              original.coeffs.at(2, m, n)};
                    const auto ref =
                        mode ? prox_nonneg_group_weighted(fiber, {1.0, 1.0}, 0.35)
                             : prox_nonneg_group_ball(fiber, 0.35);
                    CHECK(a.coeffs.at(0, m, n) == std::max(0.0, original.coeffs.at(0, m, n)));
                    CHECK(a.coeffs.at(1, m, n) == doctest::Approx(ref[0]).epsilon(1e-12));
                    CHECK(a.coeffs.at(2, m, n) == doctest::Approx(ref[1]).epsilon(1e-12));
                }
        }
    }
    SUBCASE("mask support is enforced") {
        PsdrStack a = make(1.0);
        Tensor2 mask(2, 2, 1.0);
        mask.at(0, 1) = 0.0;
        apply_prox_stack(a, 0.1, {}, ProxMode::ball, &mask);
        for (int k = 0; k < 3; ++k) {
            CHECK(a.coeffs.at(k, 0, 1) == 0.0);
            CHECK(a.coeffs.at(k, 1, 0) > 0.0);
        }
    }
}

TEST_CASE("group regularizer value") {
    SigmaGrid sigma;
    sigma.edges = {1, 2, 3};
    sigma.aleph = {0, 1};
    PsdrStack a;
    a.sigma = sigma;
    a.coeffs = Tensor3(2, 1, 1, 0.0);

    SUBCASE("zero stack has zero value") {
        const auto gs = regularizer_value(a, {});
        CHECK(gs.value == 0.0);
        CHECK(gs.feasible);
    }
    SUBCASE("single fiber [3,4] scores 5") {
        a.coeffs.at(0, 0, 0) = 3.0;
        a.coeffs.at(1, 0, 0) = 4.0;
        CHECK(regularizer_value(a, {}).value == doctest::Approx(5.0).epsilon(1e-14));
    }
    SUBCASE("matches the naive double loop on random stacks") {
        PsdrStack b;
        b.sigma = sigma;
        b.coeffs = Tensor3(2, 6, 5);
        const CounterRng rng(64);
        for (std::size_t i = 0; i < b.coeffs.size(); ++i) b.coeffs.vec()[i] = rng.uniform(i);
        const std::vector<double> xi{1.3, 0.6};
        double naive = 0.0;
        for (int m = 0; m < 6; ++m)
            for (int n = 0; n < 5; ++n) {
                double s = 0.0;
                for (std::size_t j = 0; j < 2; ++j) {
                    const double c = xi[j] * b.coeffs.at(static_cast<int>(j), m, n);
                    s += c * c;
                }
                naive += std::sqrt(s);
            }
        CHECK(regularizer_value(b, xi).value == doctest::Approx(naive).epsilon(1e-10));
    }
    SUBCASE("negative entries raise the infeasibility flag") {
        a.coeffs.at(0, 0, 0) = -1e-9;
        CHECK_FALSE(regularizer_value(a, {}).feasible);
        a.coeffs.at(0, 0, 0) = -1e-13; // inside the tolerance band
        CHECK(regularizer_value(a, {}).feasible);
    }
}

TEST_CASE("prox-check battery harness") {
    CHECK(run_prox_check(5, 300).pass());
    CHECK_FALSE(run_prox_check(5, 300, /*inject_bug=*/true).pass());
    const auto vac = run_prox_check(5, 0);
    CHECK(vac.vacuous);
    CHECK(vac.pass());
}
