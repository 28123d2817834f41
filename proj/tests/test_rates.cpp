// Transition rates: table invariants, quadrature oracles, moments and the low-temperature limit.

#include "fness/error.hpp"
#include "fness/ness.hpp"
#include "fness/rates.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace fness;

namespace {

Truncation small_trunc(int nu_cut = 6, double e_cut = 40.0) {
    Truncation t;
    t.nu_cut = nu_cut;
    t.e_cut = e_cut;
    t.quad_points = 16;
    return t;
}

const RateEngine& toy_engine() {
    static const RateEngine engine(toy_model(), small_trunc());
    return engine;
}

// Dense oracle: composite midpoint rule in u = sqrt(p^2 - a^2) on every panel between
// consecutive thresholds (never touching a threshold), then
// a = (N/Z) * 2 * int dp exp(-beta p^2/2m) (m/p~) * 2|T|^2.
std::vector<double> dense_rates(const Scatterer& sc, int j_in, double beta, double step) {
    const auto& s = sc.spec();
    const auto& basis = sc.basis();
    const double e0 = quasi_energy(s, {j_in, 0});
    const double p_cut = std::sqrt(2.0 * s.mass * sc.truncation().e_cut);
    std::vector<double> cuts{0.0, p_cut};
    for (std::size_t c = 0; c < basis.size(); ++c) {
        const double gap = quasi_energy(s, basis[c]) - e0;
        if (gap > 0.0 && std::sqrt(2.0 * s.mass * gap) < p_cut) cuts.push_back(std::sqrt(2.0 * s.mass * gap));
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> sums(basis.size(), 0.0);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k], b = cuts[k + 1];
        const double U = std::sqrt(b * b - a * a);
        const int n = std::max(8, static_cast<int>(std::ceil(U / step)));
        const double du = U / n;
        for (int i = 0; i < n; ++i) {
            const double u = (i + 0.5) * du;
            const double p = std::sqrt(a * a + u * u);
            const auto sol = sc.solve(p, j_in);
            const double boltz = std::exp(-beta * p * p / (2.0 * s.mass));
            for (std::size_t c = 0; c < basis.size(); ++c) {
                if (!sol.open_flags[c]) continue;
                const double dp = u / p * du;
                sums[c] += dp * boltz * s.mass / sol.p_out[c] * 2.0 * std::norm(sol.t_row(static_cast<Eigen::Index>(c)));
            }
        }
    }
    const double z = std::sqrt(2.0 * std::numbers::pi * s.mass / beta);
    for (double& v : sums) v *= 2.0 * s.density / z;
    return sums;
}

} // namespace

TEST_CASE("rate table invariants") {
    const auto& eng = toy_engine();
    const auto t = eng.table(1.0);
    for (double v : t.per_nu) CHECK(v >= 0.0);
    for (int to = 0; to < 3; ++to) {
        for (int from = 0; from < 3; ++from) {
            double sum = 0.0;
            for (int nu = -6; nu <= 6; ++nu) sum += t.rate(to, from, nu);
            CHECK(t.total(to, from) == doctest::Approx(sum).epsilon(1e-12));
            for (int nu = -6; nu <= 6; ++nu) {
                // unreachable: the outgoing quasi-energy exceeds every incoming energy below the cutoff
                const double gap = quasi_energy(eng.spec(), {to, nu}) - quasi_energy(eng.spec(), {from, 0});
                if (gap >= eng.truncation().e_cut) CHECK(t.rate(to, from, nu) == 0.0);
            }
        }
    }
    CHECK(t.rate(0, 1, 7) == 0.0);
    CHECK(eng.stats().max_route_mismatch <= 1e-8);
    CHECK(eng.stats().max_optical_residual < 1e-6);
}

TEST_CASE("undriven and uncoupled tables") {
    const RateEngine undriven(toy_model(0.0), small_trunc(3));
    const auto t = undriven.table(0.7);
    for (int to = 0; to < 3; ++to) {
        for (int from = 0; from < 3; ++from) {
            CHECK(t.rate(to, from, 0) > 0.0);
            for (int nu = -3; nu <= 3; ++nu) {
                if (nu != 0) CHECK(t.rate(to, from, nu) == 0.0);
            }
        }
    }
    auto spec = toy_model();
    spec.coupling_strengths = {0.0, 0.0, 0.0};
    const auto zero = RateEngine(spec, small_trunc(3)).table(1.0);
    CHECK(zero.max_rate() == 0.0);
}

TEST_CASE("rates match the dense midpoint oracle on random tuples") {
    const auto& eng = toy_engine();
    const Scatterer& sc = eng.scatterer();
    std::mt19937 rng(20240611);
    std::uniform_int_distribution<int> level(0, 2);
    std::uniform_real_distribution<double> beta_dist(0.5, 4.0);
    std::vector<std::vector<double>> cache_rows;
    int checked = 0;
    while (checked < 10) {
        const int from = level(rng);
        const int to = level(rng);
        const int nu = std::uniform_int_distribution<int>(-2, 2)(rng);
        const double beta = beta_dist(rng);
        const double got = eng.rate(to, from, nu, beta);
        if (got < 1e-8 * eng.table(beta).max_rate()) continue;
        const auto dense = dense_rates(sc, from, beta, 2e-3);
        const double ref = dense[sc.basis().index({to, nu})];
        INFO("from " << from << " to " << to << " nu " << nu << " beta " << beta);
        CHECK(std::abs(got - ref) <= 1e-4 * ref);
        ++checked;
    }
}

TEST_CASE("doubling the Gauss points leaves the rates unchanged") {
    auto t = small_trunc(4, 20.0);
    const auto a = RateEngine(toy_model(), t).table(1.5);
    t.quad_points = 32;
    const auto b = RateEngine(toy_model(), t).table(1.5);
    const double floor = 1e-10 * a.max_rate();
    for (std::size_t i = 0; i < a.per_nu.size(); ++i) {
        if (a.per_nu[i] > floor) CHECK(std::abs(a.per_nu[i] - b.per_nu[i]) <= 1e-4 * a.per_nu[i]);
    }
}

TEST_CASE("worker count does not change any bit of the result") {
    RateOptions one;
    one.workers = 1;
    RateOptions three;
    three.workers = 3;
    const auto a = RateEngine(toy_model(), small_trunc(3, 20.0), one).table(0.8);
    const auto b = RateEngine(toy_model(), small_trunc(3, 20.0), three).table(0.8);
    CHECK(a.per_nu == b.per_nu);
}

TEST_CASE("downstream quantities ignore a common rate factor") {
    const auto& eng = toy_engine();
    const auto t = eng.table(2.0);
    const auto s = t.scaled(7.3);
    for (int j = 0; j < 3; ++j) {
        for (int jp = 0; jp < 3; ++jp) {
            CHECK(exp_moment(eng.spec(), s, j, jp) == doctest::Approx(exp_moment(eng.spec(), t, j, jp)).epsilon(1e-13));
        }
    }
    const auto p1 = steady_state(build_generator(t)).p;
    const auto p2 = steady_state(build_generator(s)).p;
    CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exponential moment") {
    const RateEngine undriven(toy_model(0.0), small_trunc(3));
    for (double beta : {0.3, 3.0}) {
        CHECK(exp_moment(undriven.spec(), undriven.table(beta), 0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(moment_curvature_at_zero(undriven, 0, 1, 0.01) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    // the slope of the moment at beta = 0 vanishes (zero net energy exchange at infinite temperature)
    const auto& eng = toy_engine();
    const double h = 1e-3;
    for (auto [j, jp] : {std::pair{0, 1}, std::pair{1, 2}, std::pair{2, 0}}) {
        const double up = exp_moment(eng.spec(), eng.unnormalized_table(h), j, jp);
        const double dn = exp_moment(eng.spec(), eng.unnormalized_table(-h), j, jp);
        CHECK(std::abs((up - dn) / (2.0 * h)) < 1e-3 * 40.0);
    }
    auto t = eng.table(1.0);
    std::fill(t.per_nu.begin(), t.per_nu.end(), 0.0);
    t.refresh_totals();
    CHECK_THROWS_AS(exp_moment(eng.spec(), t, 0, 1), NumericalError);
}

TEST_CASE("low-temperature limit") {
    const auto& eng = toy_engine();
    const auto lim = eng.zero_temperature_table();
    const auto& s = eng.spec();
    for (int from = 0; from < 3; ++from) {
        for (int to = 0; to < 3; ++to) {
            CHECK(lim.total(to, from) > 0.0);
            for (int nu = -6; nu <= 6; ++nu) {
                const bool exo = quasi_energy(s, {to, nu}) < quasi_energy(s, {from, 0});
                if (exo) CHECK(lim.rate(to, from, nu) > 0.0);
                else CHECK(lim.rate(to, from, nu) == 0.0);
            }
        }
    }
    // beta * a(beta) approaches the limit on every exothermic channel (the elastic nu = 0
    // channel follows a different power law and is not part of the limit table)
    const double beta = 4000.0;
    const auto t = eng.table(beta);
    const double floor = 1e-6 * lim.max_rate();
    for (int from = 0; from < 3; ++from) {
        for (int to = 0; to < 3; ++to) {
            for (int nu = -6; nu <= 6; ++nu) {
                if (lim.rate(to, from, nu) <= floor) continue;
                CHECK(beta * t.rate(to, from, nu) == doctest::Approx(lim.rate(to, from, nu)).epsilon(2e-2));
            }
        }
    }
}
