// Gauss-Legendre rules and the threshold-aware momentum grid.

#include "fness/error.hpp"
#include "fness/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fness;

TEST_CASE("Gauss-Legendre rule integrates polynomials of degree 2n-1 exactly") {
    for (int n : {2, 5, 16, 32}) {
        const auto rule = gauss_legendre(n);
        REQUIRE(rule.nodes.size() == static_cast<std::size_t>(n));
        for (int deg = 0; deg <= 2 * n - 1; ++deg) {
            double sum = 0.0;
            for (int i = 0; i < n; ++i) sum += rule.weights[i] * std::pow(rule.nodes[i], deg);
            const double exact = (deg % 2) ? 0.0 : 2.0 / (deg + 1);
            CHECK(sum == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
        }
        for (int i = 1; i < n; ++i) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
    }
    const auto two = gauss_legendre(2);
    CHECK(two.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
}

TEST_CASE("momentum grid covers [0, p_cut] and anchors panels") {
    const std::vector<Threshold> th{{0.0, 7}, {1.0, 3}, {2.5, 5}};
    const auto grid = momentum_grid(th, 6.0, 16, 0.25);
    double length = 0.0;
    for (const auto& node : grid) {
        CHECK(node.p > 0.0);
        CHECK(node.p < 6.0);
        CHECK(node.weight_dp > 0.0);
        length += node.weight_dp;
        if (node.p < 1.0) CHECK(node.anchor == 7);
        else if (node.p < 2.5) CHECK(node.anchor == 3);
        else CHECK(node.anchor == 5);
    }
    CHECK(length == doctest::Approx(6.0).epsilon(1e-13));

    // thresholds beyond the cutoff are ignored; a missing p = 0 entry gets an unanchored panel
    const auto g2 = momentum_grid({{1.0, 2}, {9.0, 4}}, 3.0, 8, 0.25);
    for (const auto& node : g2) CHECK(node.anchor == (node.p < 1.0 ? -1 : 2));

    CHECK_THROWS_AS(momentum_grid(th, 0.0, 16, 0.25), ConfigError);
    CHECK_THROWS_AS(momentum_grid(th, 6.0, 16, 0.0), ConfigError);
}

TEST_CASE("momentum grid integrates square-root threshold singularities") {
    // int_0^3 dp / sqrt|p^2 - 1| = pi/2 + acosh(3): inverse square-root cusps on both sides of p = 1
    const auto grid = momentum_grid({{0.0, 0}, {1.0, 1}}, 3.0, 16, 0.25);
    double sum = 0.0;
    for (const auto& node : grid) sum += node.weight_dp / std::sqrt(std::abs(node.p * node.p - 1.0));
    CHECK(sum == doctest::Approx(std::numbers::pi / 2.0 + std::acosh(3.0)).epsilon(1e-9));

    // weight_du integrates in the outgoing momentum of the anchored channel: int du over a panel = U
    double u_len = 0.0;
    for (const auto& node : grid) {
        if (node.anchor == 1) u_len += node.weight_du;
    }
    CHECK(u_len == doctest::Approx(std::sqrt(8.0)).epsilon(1e-13));

    // Gaussian moment
    const auto g = momentum_grid({{0.0, 0}}, 40.0, 16, 0.25);
    double gauss = 0.0;
    for (const auto& node : g) gauss += node.weight_dp * std::exp(-0.5 * node.p * node.p);
    CHECK(gauss == doctest::Approx(std::sqrt(std::numbers::pi / 2.0)).epsilon(1e-13));
}
