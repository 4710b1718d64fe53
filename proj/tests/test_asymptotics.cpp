#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "loglayer/asymptotics.hpp"

using namespace loglayer;

namespace {
struct Lab {
    GridPtr grid;
    EigenPair pair;
    BarrierKit kit;
};
Lab disk_lab(std::size_t m = 301) {
    Lab L;
    L.grid = build_grid(DomainSpec{DomainKind::ball, 2, 0.0, 1.0}, m, Grading::boundary_graded(2.0));
    L.pair = principal_eigenpair(L.grid);
    L.kit = barrier_constants(L.pair, L.grid, 3.0, 0.5, 1.0);
    return L;
}

// continuation skeleton carrying a synthetic boundary trace
ContinuationResult synthetic_curve(const Lab& L, double amplitude, double sigma) {
    ContinuationResult cont;
    cont.grid = L.grid;
    cont.p = 3.0;
    cont.q = 0.5;
    for (int k = 0; k <= 20; ++k) {
        const double mu = std::pow(10.0, 0.25 * k);
        cont.mu_values.push_back(mu);
        cont.boundary_values.push_back(amplitude * std::pow(mu, sigma));
    }
    return cont;
}
} // namespace

TEST_CASE("boundary scaling fit recovers an exact power law") {
    auto L = disk_lab();
    const double sigma = L.kit.tau * L.kit.rho;
    CHECK(sigma == Catch::Approx(2.0 / (3.0 - 1.0 + 1.0)).epsilon(1e-14));
    const double amp = std::sqrt(L.kit.A_lower * L.kit.A_upper);
    auto cont = synthetic_curve(L, amp, sigma);

    auto rep = boundary_scaling_fit(cont, L.kit, 1e2, 1e5);
    CHECK(rep.exponent_theory == Catch::Approx(sigma).epsilon(1e-14));
    CHECK(rep.exponent_fitted == Catch::Approx(sigma).epsilon(1e-10));
    CHECK(rep.r2 >= 1.0 - 1e-12);
    CHECK(rep.window_mu.size() == 13);
    CHECK(rep.window_mu.front() == Catch::Approx(100.0).epsilon(1e-12));
    CHECK(rep.sandwich_all);
    for (bool ok : rep.per_mu_sandwich) CHECK(ok);
}

TEST_CASE("boundary scaling fit flags amplitudes outside the barrier bracket") {
    auto L = disk_lab();
    const double sigma = L.kit.tau * L.kit.rho;
    auto high = synthetic_curve(L, L.kit.A_upper * 1.5, sigma);
    auto rep = boundary_scaling_fit(high, L.kit, 1e2, 1e5);
    CHECK_FALSE(rep.sandwich_all);
    // the exponent itself is still the true one
    CHECK(rep.exponent_fitted == Catch::Approx(sigma).epsilon(1e-10));
}

TEST_CASE("scaling window validation") {
    auto L = disk_lab();
    auto cont = synthetic_curve(L, 1.0, L.kit.tau * L.kit.rho);
    CHECK_THROWS_WITH(boundary_scaling_fit(cont, L.kit, 0.0, 1e2),
                      "scaling window must satisfy 0 < mu_lo < mu_hi");
    CHECK_THROWS_WITH(boundary_scaling_fit(cont, L.kit, 10.0, 500.0),
                      "scaling window must span at least two decades");
    CHECK_THROWS_WITH(boundary_scaling_fit(cont, L.kit, 0.5, 1e3),
                      "scaling window must lie above mu_lower of the barrier kit");

    ContinuationResult sparse;
    sparse.grid = L.grid;
    sparse.p = 3.0;
    sparse.q = 0.5;
    for (double mu : {1.0, 1e2, 1e3, 1e4}) {
        sparse.mu_values.push_back(mu);
        sparse.boundary_values.push_back(std::pow(mu, 0.5));
    }
    CHECK_THROWS_WITH(boundary_scaling_fit(sparse, L.kit, 1e2, 1e4),
                      "scaling window contains too few continuation points");
}

TEST_CASE("increment classifier separates convergent and divergent sweeps") {
    auto geometric_mu = [] {
        std::vector<double> mu;
        for (int k = 0; k <= 20; ++k) mu.push_back(std::pow(10.0, 0.25 * k));
        return mu;
    }();

    SECTION("saturating sweep is convergent") {
        NormSweep s;
        s.mu = geometric_mu;
        for (double mu : s.mu) s.values.push_back(2.0 - 1.0 / mu);
        detail::classify_sweep(s);
        CHECK(s.classification == Classification::convergent);
        CHECK_FALSE(s.growth_exponent.has_value());
    }

    SECTION("power-law sweep is divergent with the right exponent") {
        NormSweep s;
        s.mu = geometric_mu;
        for (double mu : s.mu) s.values.push_back(3.0 * std::pow(mu, 0.7));
        detail::classify_sweep(s);
        CHECK(s.classification == Classification::divergent);
        REQUIRE(s.growth_exponent.has_value());
        CHECK(*s.growth_exponent == Catch::Approx(0.7).epsilon(1e-10));
    }

    SECTION("constant sweep is convergent") {
        NormSweep s;
        s.mu = geometric_mu;
        s.values.assign(s.mu.size(), 3.14);
        detail::classify_sweep(s);
        CHECK(s.classification == Classification::convergent);
    }

    SECTION("growing but non-monotone sweep is not called divergent") {
        NormSweep s;
        s.mu = geometric_mu;
        for (std::size_t k = 0; k < s.mu.size(); ++k)
            s.values.push_back(std::pow(s.mu[k], 0.5) * (k % 2 == 0 ? 1.0 : 0.4));
        detail::classify_sweep(s);
        CHECK(s.classification == Classification::convergent);
    }

    SECTION("too few points to classify") {
        NormSweep s;
        s.mu = {1.0, 10.0, 100.0, 1000.0, 10000.0};
        s.values = {1.0, 2.0, 3.0, 4.0, 5.0};
        CHECK_THROWS_WITH(detail::classify_sweep(s),
                          "norm sweep needs at least 6 schedule points to classify");
    }
}

TEST_CASE("barrier power integral") {
    auto coarse = disk_lab(401);
    auto fine = disk_lab(1601);

    SECTION("quadrature with the analytic boundary cell is resolution-stable") {
        const double i1 = detail::barrier_power_integral(coarse.pair, 0.5, 0.0);
        const double i2 = detail::barrier_power_integral(fine.pair, 0.5, 0.0);
        CHECK(i1 > 0.0);
        CHECK(std::abs(i1 - i2) <= 0.01 * i2);
    }

    SECTION("a positive shift lowers the integral") {
        const double bare = detail::barrier_power_integral(coarse.pair, 0.5, 0.0);
        const double shifted = detail::barrier_power_integral(coarse.pair, 0.5, 0.1);
        CHECK(shifted < bare);
    }

    SECTION("nonintegrable power needs a shift") {
        CHECK_THROWS_WITH(detail::barrier_power_integral(coarse.pair, 1.2, 0.0),
                          "barrier integral diverges for rho*r >= 1 without shift");
        CHECK(detail::barrier_power_integral(coarse.pair, 1.2, 0.1) > 0.0);
    }
}

TEST_CASE("norm sweeps along a real continuation") {
    auto L = disk_lab();
    std::vector<double> schedule{0.0};
    for (int k = 0; k <= 10; ++k) schedule.push_back(std::pow(10.0, 0.5 * k));
    auto cont = continue_in_mu(L.grid, 3.0, 0.5, schedule);

    SECTION("below the threshold: convergent, inside the barrier window") {
        auto s = lr_volume_sweep(cont, 0.5, &L.pair, &L.kit);
        CHECK(s.classification == Classification::convergent);
        REQUIRE(s.limit_window.has_value());
        CHECK(s.values.back() >= s.limit_window->first * 0.98);
        CHECK(s.values.back() <= s.limit_window->second * 1.02);
        CHECK_FALSE(s.outside_scope);
    }

    SECTION("above the threshold: divergent at the barrier-predicted rate") {
        auto s = lr_volume_sweep(cont, 2.0, &L.pair, &L.kit);
        CHECK(s.classification == Classification::divergent);
        REQUIRE(s.growth_exponent.has_value());
        REQUIRE(s.oracle_exponent.has_value());
        CHECK(*s.oracle_exponent == Catch::Approx(L.kit.tau).epsilon(1e-12));
        CHECK(std::abs(*s.growth_exponent - *s.oracle_exponent) <= 0.10 * *s.oracle_exponent);
    }

    SECTION("gradient norms blow up on the disk and are in scope") {
        auto s = gradient_norm_sweep(cont, 2.0);
        CHECK_FALSE(s.outside_scope);
        CHECK(s.classification == Classification::divergent);
        REQUIRE(s.growth_exponent.has_value());
        CHECK(*s.growth_exponent > 0.0);
        CHECK_THROWS_WITH(gradient_norm_sweep(cont, -1.0), "gradient sweep requires r > 0");
    }

    SECTION("sandwich report on a mid-branch solution") {
        const auto& sol = cont.solutions[3]; // mu = 10
        auto rep = sandwich_report(sol, L.pair, L.kit);
        CHECK(rep.pass);
        CHECK(rep.worst_rel_violation <= 1e-2);

        Solution low = cont.solutions[0]; // mu = 0 below mu_lower
        CHECK_THROWS_WITH(sandwich_report(low, L.pair, L.kit),
                          "sandwich_report requires mu >= mu_lower");
    }
}

TEST_CASE("annulus gradient sweeps are flagged outside the hypothesis") {
    auto grid = build_grid(DomainSpec{DomainKind::annulus, 2, 0.5, 1.0}, 201,
                           Grading::boundary_graded(2.0));
    std::vector<double> schedule{0.0};
    for (int k = 0; k <= 5; ++k) schedule.push_back(std::pow(10.0, 0.5 * k));
    auto cont = continue_in_mu(grid, 3.0, 0.5, schedule);

    CHECK(gradient_norm_sweep(cont, 1.5).outside_scope);
    CHECK_FALSE(gradient_norm_sweep(cont, 0.5).outside_scope);
}
