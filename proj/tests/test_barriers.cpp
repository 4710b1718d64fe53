#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "loglayer/barriers.hpp"
#include "oracles.hpp"

using namespace loglayer;

namespace {
struct Setup {
    GridPtr grid;
    EigenPair pair;
};
Setup disk_setup(std::size_t m = 601) {
    Setup s;
    s.grid = build_grid(DomainSpec{DomainKind::ball, 2, 0.0, 1.0}, m, Grading::boundary_graded(2.0));
    s.pair = principal_eigenpair(s.grid);
    return s;
}
} // namespace

TEST_CASE("exponent validation") {
    CHECK_THROWS_WITH(validate_exponents(1.0, 0.5), "p must satisfy p > 1");
    CHECK_THROWS_WITH(validate_exponents(3.0, 1.0), "q must satisfy 0 < q < 1");
    CHECK_THROWS_WITH(validate_exponents(3.0, 0.0), "q must satisfy 0 < q < 1");
    CHECK_NOTHROW(validate_exponents(3.0, 0.5));
}

TEST_CASE("barrier constants on the unit disk match the Bessel oracles") {
    auto s = disk_setup();
    const double p = 3.0, q = 0.5;
    BarrierKit kit = barrier_constants(s.pair, s.grid, p, q, 1.0);

    CHECK(kit.beta == Catch::Approx(oracles::disk_beta()).epsilon(1e-4));
    // single boundary component: both normal-derivative extrema coincide
    CHECK(kit.c1 == Catch::Approx(oracles::disk_c1()).epsilon(1e-3));
    CHECK(kit.c2 == Catch::Approx(oracles::disk_c1()).epsilon(1e-3));
    CHECK(kit.c3 == Catch::Approx(oracles::disk_c3()).epsilon(1e-2));
    CHECK(kit.c_mu == Catch::Approx(1.0 + std::pow(kit.mu_lower, -kit.tau)).epsilon(1e-14));

    SECTION("exponent identities") {
        CHECK(kit.tau == Catch::Approx((p - 1.0) / (p - 2.0 * q + 1.0)).epsilon(1e-15));
        CHECK(kit.rho == Catch::Approx(2.0 / (p - 1.0)).epsilon(1e-15));
        CHECK((1.0 - p) * kit.rho + 2.0 == Catch::Approx(0.0).margin(1e-15));
        const double lhs = kit.tau * (kit.rho + 1.0);
        CHECK(lhs == Catch::Approx(1.0 + kit.tau * kit.rho * q).epsilon(1e-14));
        CHECK(lhs == Catch::Approx((p + 1.0) / (p - 2.0 * q + 1.0)).epsilon(1e-14));
    }

    SECTION("amplitudes follow the closed forms") {
        const double up1 = std::pow(kit.rho * (kit.rho + 1.0) * kit.c3 +
                                        kit.rho * kit.c_mu * kit.beta + kit.c_mu * kit.c_mu,
                                    1.0 / (p - 1.0));
        const double up2 = std::pow(kit.rho * kit.c1, 1.0 / (q - 1.0));
        CHECK(kit.A_upper == Catch::Approx(std::max(up1, up2)).epsilon(1e-14));
        const double lo1 = std::pow(kit.rho * (kit.rho + 1.0) * kit.b1, 1.0 / (p - 1.0));
        const double lo2 = std::pow(kit.b2, 2.0 / (p - 1.0));
        const double lo3 = std::pow(kit.rho * kit.c2, 1.0 / (q - 1.0));
        CHECK(kit.A_lower == Catch::Approx(std::min({lo1, lo2, lo3})).epsilon(1e-14));
        CHECK(kit.A_lower < kit.A_upper);
        CHECK(kit.A_lower > 0.0);
    }

    SECTION("layer split constants") {
        CHECK(kit.eps0 > 0.0);
        CHECK(kit.eps0 <= 0.5); // the split scan may settle on inradius/2 itself
        CHECK(kit.b1 > 0.0);
        CHECK(kit.b2 > 0.0);
        CHECK(kit.d1 > 0.0);
        CHECK(kit.d2 >= kit.d1);
    }
}

TEST_CASE("barrier residual signs certify sub- and supersolutions") {
    auto s = disk_setup();
    for (auto [p, q] : {std::pair{3.0, 0.5}, std::pair{2.0, 0.5}, std::pair{4.0, 0.9}}) {
        BarrierKit kit = barrier_constants(s.pair, s.grid, p, q, 1.0);
        const auto nd = normal_derivative(s.pair.phi);
        for (double mu : {1.0, 10.0, 100.0}) {
            CAPTURE(p, q, mu);
            // The amplitudes are chosen so the binding node has zero margin,
            // so the sign checks carry a rounding slack relative to the size
            // of the terms that cancel there.
            const double shift = std::pow(mu, -kit.tau);
            auto islack = [&](double A, std::size_t i) {
                const double phi = s.pair.phi.values[i];
                const double dphi = s.pair.phi_prime.values[i];
                const double sh = phi + shift;
                return 1e-10 * A * std::pow(sh, -kit.rho - 2.0) *
                       (kit.rho * (kit.rho + 1.0) * dphi * dphi +
                        kit.rho * sh * kit.beta * phi + sh * sh + std::pow(A, p - 1.0));
            };
            auto bslack = [&](double A, double dn) {
                return 1e-10 * std::pow(A, q) * std::pow(mu, kit.tau * (kit.rho + 1.0)) *
                       (std::pow(A, 1.0 - q) * kit.rho * std::abs(dn) + 1.0);
            };
            // supersolution: Delta psi + psi - psi^p <= 0, d(psi)/d(nu) >= mu psi^q
            auto sup = residual_of_barrier(kit.A_upper, s.pair, mu, p, q);
            for (std::size_t i = 0; i < sup.interior.size(); ++i)
                CHECK(sup.interior.values[i] <= islack(kit.A_upper, i));
            for (std::size_t b = 0; b < sup.boundary.size(); ++b)
                CHECK(sup.boundary[b] >= -bslack(kit.A_upper, nd[b]));
            // subsolution: reversed signs
            auto sub = residual_of_barrier(kit.A_lower, s.pair, mu, p, q);
            for (std::size_t i = 0; i < sub.interior.size(); ++i)
                CHECK(sub.interior.values[i] >= -islack(kit.A_lower, i));
            for (std::size_t b = 0; b < sub.boundary.size(); ++b)
                CHECK(sub.boundary[b] <= bslack(kit.A_lower, nd[b]));
        }
    }
}

TEST_CASE("barrier profile basics") {
    auto s = disk_setup(201);
    const double p = 3.0, q = 0.5;
    BarrierKit kit = barrier_constants(s.pair, s.grid, p, q, 1.0);

    RadialField lo = barrier_profile(kit.A_lower, s.pair, 10.0, p, q);
    RadialField hi = barrier_profile(kit.A_upper, s.pair, 10.0, p, q);
    for (std::size_t i = 0; i < lo.size(); ++i) {
        CHECK(lo.values[i] > 0.0);
        CHECK(lo.values[i] < hi.values[i]);
    }
    // boundary value scales like A mu^{tau rho}
    const std::size_t b = s.grid->boundary_indices.back();
    CHECK(hi.values[b] ==
          Catch::Approx(kit.A_upper * std::pow(10.0, kit.tau * kit.rho)).epsilon(1e-12));

    CHECK_THROWS_WITH(barrier_profile(kit.A_upper, s.pair, 0.0, p, q),
                      "barrier profile requires mu > 0");
}

TEST_CASE("explicit eps0 must lie inside the domain") {
    auto s = disk_setup(201);
    CHECK_THROWS_WITH(barrier_constants(s.pair, s.grid, 3.0, 0.5, 1.0, 1.5),
                      "eps0 must lie in (0, inradius)");
    BarrierKit kit = barrier_constants(s.pair, s.grid, 3.0, 0.5, 1.0, 0.25);
    CHECK(kit.eps0 == Catch::Approx(0.25));
    CHECK(kit.A_lower > 0.0);
}
