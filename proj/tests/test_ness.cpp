// Pauli generator, steady state, dynamics and the high-temperature expansion.

#include "fness/error.hpp"
#include "fness/ness.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fness;

namespace {

RateTable table_from_totals(const Eigen::MatrixXd& a) {
    // a(to, from) placed on nu = 0
    Truncation t;
    t.nu_cut = 0;
    auto table = RateTable::zeros(static_cast<std::size_t>(a.rows()), t, 1.0);
    for (int to = 0; to < a.rows(); ++to) {
        for (int from = 0; from < a.cols(); ++from) table.set_rate(to, from, 0, a(to, from));
    }
    table.refresh_totals();
    return table;
}

// Matrix-tree oracle: the stationary vector of W is proportional to the principal
// minors of -W (Kirchhoff).
Eigen::VectorXd kirchhoff(const Eigen::MatrixXd& w) {
    const auto n = w.rows();
    Eigen::VectorXd p(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::MatrixXd minor(n - 1, n - 1);
        for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
            if (r == j) continue;
            for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
                if (c == j) continue;
                minor(rr, cc++) = -w(r, c);
            }
            ++rr;
        }
        p(j) = minor.determinant();
    }
    return p / p.sum();
}

Truncation small_trunc(int nu_cut, double e_cut) {
    Truncation t;
    t.nu_cut = nu_cut;
    t.e_cut = e_cut;
    t.quad_points = 16;
    return t;
}

} // namespace

TEST_CASE("generator construction") {
    Eigen::MatrixXd a(2, 2);
    a << 5.0, 1.0, 1.0, 9.0;  // diagonal (elastic) entries must not enter W
    const auto w = build_generator(table_from_totals(a));
    Eigen::MatrixXd expected(2, 2);
    expected << -1.0, 1.0, 1.0, -1.0;
    CHECK((w - expected).norm() == 0.0);
    CHECK(w.colwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-level steady states") {
    Eigen::MatrixXd a(2, 2);
    a << 0.0, 2.0, 2.0, 0.0;
    const auto p = steady_state(build_generator(table_from_totals(a))).p;
    CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-15));

    // rates obeying the non-driven balance give the Boltzmann ratio
    const double beta = 1.7, e1 = -0.5, e2 = 0.3, gamma = 0.8;
    a << 0.0, gamma * std::exp(-beta * e1), gamma * std::exp(-beta * e2), 0.0;
    const auto q = steady_state(build_generator(table_from_totals(a)), beta);
    CHECK(q.beta == beta);
    CHECK(q.p(1) / q.p(0) == doctest::Approx(std::exp(-beta * (e2 - e1))).epsilon(1e-13));
}

TEST_CASE("steady state matches the matrix-tree oracle on random generators") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(1e-3, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd a(3, 3);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) a(r, c) = u(rng);
        }
        const auto w = build_generator(table_from_totals(a));
        const auto p = steady_state(w).p;
        CHECK((p - kirchhoff(w)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((w * p).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, w.cwiseAbs().colwise().sum().maxCoeff()));
        // a common factor on every rate leaves the state unchanged
        CHECK((steady_state(3.7 * w).p - p).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("a disconnected rate graph is rejected") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 1) = a(1, 0) = 1.0;  // level 3 isolated
    CHECK_THROWS_AS(steady_state(build_generator(table_from_totals(a))), NumericalError);
}

TEST_CASE("population dynamics") {
    Eigen::MatrixXd a(3, 3);
    a << 0.0, 1.0, 0.4, 0.7, 0.0, 2.0, 0.3, 1.1, 0.0;
    const auto w = build_generator(table_from_totals(a));
    const auto ness = steady_state(w);
    for (const auto& s : evolve(w, ness, 5.0, 0.01)) CHECK((s.p - ness.p).cwiseAbs().maxCoeff() < 1e-12);

    Populations start;
    start.p = Eigen::Vector3d(1.0, 0.0, 0.0);
    const auto traj = evolve(w, start, 40.0, 0.01);
    for (const auto& s : traj) CHECK(std::abs(s.p.sum() - 1.0) < 1e-10);
    CHECK((traj.back().p - ness.p).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("Boltzmann distribution") {
    const auto spec = toy_model();
    CHECK(boltzmann(spec, 0.0).p.isApprox(Eigen::Vector3d::Constant(1.0 / 3.0), 1e-15));
    Eigen::Vector3d expected(std::exp(0.5), 1.0, std::exp(-0.4));
    expected /= expected.sum();
    CHECK((boltzmann(spec, 1.0).p - expected).cwiseAbs().maxCoeff() < 1e-15);
    const auto cold = boltzmann(spec, std::numeric_limits<double>::infinity()).p;
    CHECK(cold == Eigen::Vector3d(1.0, 0.0, 0.0));
}

TEST_CASE("high-temperature slope and thermal-domain bound without driving") {
    const RateEngine eng(toy_model(0.0), small_trunc(0, 2000.0));  // undriven: Floquet indices never mix
    const auto grid = default_slope_grid(eng.spec());
    CHECK(grid.front() == doctest::Approx(0.04));
    CHECK(high_t_slope(eng, 0, 1, grid) == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(high_t_slope(eng, 0, 2, grid) == doctest::Approx(-0.9).epsilon(1e-6));
    CHECK(high_t_slope(eng, 1, 0, grid) == doctest::Approx(-high_t_slope(eng, 0, 1, grid)).epsilon(1e-12));
    CHECK(thermal_domain_bound(eng, 0, 1, 0.01) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(thermal_domain_bound(eng.spec(), 0.0, 0, 2) == doctest::Approx(2.0 / 0.9).epsilon(1e-15));
    CHECK_THROWS_AS(thermal_domain_bound(eng.spec(), 0.0, 1, 1), ConfigError);
}

TEST_CASE("undriven steady state is the Boltzmann state") {
    const RateEngine eng(toy_model(0.0), small_trunc(0, 2000.0));  // undriven: Floquet indices never mix
    for (double beta : {0.2, 1.0, 5.0, 20.0}) {
        const auto p = steady_state(build_generator(eng.table(beta)), beta).p;
        CHECK((p - boltzmann(eng.spec(), beta).p).cwiseAbs().maxCoeff() < 1e-6);
    }
}
