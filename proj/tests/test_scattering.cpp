// Lippmann-Schwinger system, T extraction and unitarity residuals.

#include "fness/error.hpp"
#include "fness/scattering.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fness;

namespace {

double bessel_j(int n, double x) {
    double sign = 1.0;
    if (n < 0) {
        n = -n;
        if (n % 2) sign = -sign;
    }
    if (x < 0.0) {
        x = -x;
        if (n % 2) sign = -sign;
    }
    return sign * std::cyl_bessel_j(static_cast<double>(n), x);
}

// The system matrix assembled from the closed forms (Bessel phase factor, branch rule of
// the Green integral), independent of the library's assembly.
Eigen::MatrixXcd reference_matrix(const SystemSpec& s, int nu_cut, double p, int j_in) {
    const int width = 2 * nu_cut + 1;
    const int n = static_cast<int>(s.num_levels()) * width;
    const double e_in = p * p / (2.0 * s.mass) + s.levels[j_in];
    Eigen::MatrixXcd a(n, n);
    for (int r = 0; r < n; ++r) {
        const int jr = r / width, nr = r % width - nu_cut;
        const double kin = e_in - s.levels[jr] - nr * s.hbar * s.omega;
        const cdouble g = kin > 0.0 ? cdouble(0.0, -std::numbers::pi * std::sqrt(2.0 * s.mass / kin))
                                    : cdouble(-std::numbers::pi * std::sqrt(2.0 * s.mass / -kin), 0.0);
        for (int c = 0; c < n; ++c) {
            const int jc = c / width, nc = c % width - nu_cut;
            cdouble v{0.0, 0.0};
            for (std::size_t i = 0; i < s.num_scatterers(); ++i) {
                v += std::conj(s.overlaps(i, jr)) * s.coupling_strengths[i] * s.overlaps(i, jc);
            }
            const double k = (s.drive_profile[jr] - s.drive_profile[jc]) * s.lambda_drive / (s.hbar * s.omega);
            v *= bessel_j(nr - nc, k);
            a(r, c) = (r == c ? std::sqrt(2.0 * std::numbers::pi * s.hbar) : 0.0) - g * v;
        }
    }
    return a;
}

// Gaussian elimination with partial pivoting.
Eigen::VectorXcd eliminate(Eigen::MatrixXcd a, Eigen::VectorXcd b) {
    const auto n = a.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index piv = k;
        for (Eigen::Index r = k + 1; r < n; ++r) {
            if (std::abs(a(r, k)) > std::abs(a(piv, k))) piv = r;
        }
        a.row(k).swap(a.row(piv));
        std::swap(b(k), b(piv));
        for (Eigen::Index r = k + 1; r < n; ++r) {
            const cdouble f = a(r, k) / a(k, k);
            a.row(r) -= f * a.row(k);
            b(r) -= f * b(k);
        }
    }
    Eigen::VectorXcd x(n);
    for (Eigen::Index k = n - 1; k >= 0; --k) {
        cdouble acc = b(k);
        for (Eigen::Index c = k + 1; c < n; ++c) acc -= a(k, c) * x(c);
        x(k) = acc / a(k, k);
    }
    return x;
}

Truncation trunc_with(int nu_cut) {
    Truncation t;
    t.nu_cut = nu_cut;
    return t;
}

} // namespace

TEST_CASE("channel basis ordering") {
    const ChannelBasis b(3, 2);
    CHECK(b.size() == 15);
    CHECK(b.index({0, -2}) == 0);
    CHECK(b.index({1, 0}) == 7);
    CHECK(b[14] == Channel{2, 2});
    CHECK_FALSE(b.contains({0, 3}));
    CHECK_THROWS_AS(b.index({3, 0}), ConfigError);
}

TEST_CASE("outgoing momenta and Green factor branches") {
    const auto s = toy_model();
    CHECK(*outgoing_momentum(s, 0.7, 1, {1, 0}) == doctest::Approx(0.7).epsilon(1e-15));
    // level 2 -> level 1 releases 0.5
    CHECK(*outgoing_momentum(s, 1.0, 1, {0, 0}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_FALSE(outgoing_momentum(s, 0.1, 1, {1, 1}).has_value());

    const cdouble g1 = green_factor(1.0, 2.0);
    CHECK(std::abs(g1 - cdouble(0.0, -std::numbers::pi)) < 1e-15);
    CHECK(std::abs(green_factor(1.0, -2.0) - cdouble(-std::numbers::pi, 0.0)) < 1e-15);
    CHECK(std::abs(green_factor(1.0, 8.0) - cdouble(0.0, -std::numbers::pi / 2.0)) < 1e-15);
    CHECK_THROWS_AS(green_factor(1.0, 0.0), ThresholdError);
}

TEST_CASE("a momentum on a channel threshold is reported") {
    // p = 1 from level 1 carries exactly the energy of level 2
    CHECK_THROWS_AS(solve_amplitudes(toy_model(), trunc_with(8), 1.0, 0), ThresholdError);
}

TEST_CASE("uncoupled system") {
    auto s = toy_model();
    s.coupling_strengths = {0.0, 0.0, 0.0};
    const auto t = trunc_with(3);
    const auto a = build_system(s, t, 1.3, 1);
    CHECK((a - std::sqrt(2.0 * std::numbers::pi) * Eigen::MatrixXcd::Identity(a.rows(), a.cols())).norm() == 0.0);
    const auto sol = solve_amplitudes(s, t, 1.3, 1);
    const Scatterer sc(s, t);
    const auto in = sc.basis().index({1, 0});
    for (Eigen::Index c = 0; c < sol.psi.size(); ++c) {
        const double expected = (static_cast<std::size_t>(c) == in) ? 1.0 / std::sqrt(2.0 * std::numbers::pi) : 0.0;
        CHECK(std::abs(sol.psi(c) - expected) < 1e-15);
    }
    CHECK(t_matrix_elements(sol, s, t).norm() == 0.0);
    CHECK(optical_theorem_residual(s, t, 1.3, {1, 0}) == 0.0);
}

TEST_CASE("undriven system does not mix Floquet indices") {
    const auto s = toy_model(0.0);
    const auto t = trunc_with(3);
    const Scatterer sc(s, t);
    const auto a = sc.system_matrix(1.3, 0);
    for (std::size_t r = 0; r < sc.basis().size(); ++r) {
        for (std::size_t c = 0; c < sc.basis().size(); ++c) {
            if (sc.basis()[r].nu != sc.basis()[c].nu) CHECK(a(r, c) == cdouble(0.0, 0.0));
        }
    }
    const auto sol = sc.solve(1.3, 0);
    const auto tr = t_matrix_elements(sol, s, t);
    for (std::size_t c = 0; c < sc.basis().size(); ++c) {
        if (sc.basis()[c].nu != 0) CHECK(std::abs(tr(c)) == 0.0);
    }
}

TEST_CASE("amplitudes match an independent assembly and elimination") {
    const auto s = toy_model();
    const auto t = trunc_with(8);
    const Scatterer sc(s, t);
    for (double p : {0.3, 1.1, 2.9}) {
        for (int j : {0, 1, 2}) {
            const Eigen::MatrixXcd ref = reference_matrix(s, 8, p, j);
            const Eigen::MatrixXcd a = sc.system_matrix(p, j);
            REQUIRE(a.rows() == 51);
            CHECK((a - ref).norm() <= 1e-12 * ref.norm());

            Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(51);
            rhs(static_cast<Eigen::Index>(sc.basis().index({j, 0}))) = 1.0;
            const Eigen::VectorXcd psi_ref = eliminate(ref, rhs);
            const auto sol = sc.solve(p, j);
            CHECK((sol.psi - psi_ref).norm() <= 1e-10 * psi_ref.norm());
            CHECK((a * sol.psi - rhs).norm() <= 1e-10);
        }
    }
}

TEST_CASE("condition number of the toy-model system at p = 1.1") {
    const Scatterer sc(toy_model(), trunc_with(8));
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sc.system_matrix(1.1, 0));
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    MESSAGE("cond(A) at p = 1.1, level 1, nu_cut = 8: " << cond);
    CHECK(cond > 1.0);
    CHECK(cond < 1e3);
    const auto sol = sc.solve(1.1, 0);
    // the solver's reciprocal-condition estimate is within an order of magnitude of the SVD value
    CHECK(sol.rcond * cond > 0.1);
    CHECK(sol.rcond * cond < 10.0);
}

TEST_CASE("T-extraction routes agree and unitarity holds") {
    const auto s = toy_model();
    const Scatterer sc(s, trunc_with(8));
    const double p_cut = std::sqrt(2.0 * 100.0);
    for (int k = 1; k <= 20; ++k) {
        const double p = p_cut * k / 20.0 - 1e-3;
        for (int j = 0; j < 3; ++j) {
            const auto sol = sc.solve(p, j);
            CHECK(sc.route_mismatch(sol) <= 1e-8);
            const auto idx = sc.basis().index({j, 0});
            CHECK(sol.t_row(static_cast<Eigen::Index>(idx)).imag() <= 0.0);
            CHECK(std::abs(sc.t_element(sol, idx, +1) - sc.t_element(sol, idx, -1)) <= 1e-12);
            const auto rep = sc.unitarity(p, j);
            CHECK(rep.im_diag <= 0.0);
            CHECK(rep.first_residual < 1e-6);
            CHECK(rep.second_residual < 1e-6);
            CHECK(rep.merged_residual < 1e-6);
            CHECK(sc.edge_ratio(sol) < 1e-3);
        }
    }
}

TEST_CASE("first unitarity form is exact in every window; the reversed form converges") {
    const auto s = toy_model(1.5);
    double prev = 1.0;
    for (int nc : {1, 2, 4, 8, 12}) {
        CHECK(optical_theorem_residual(s, trunc_with(nc), 2.0, {0, 0}) < 1e-13);
        const double r = Scatterer(s, trunc_with(nc)).unitarity(2.0, 0).second_residual;
        MESSAGE("nu_cut " << nc << ": reversed-form residual " << r);
        CHECK(r <= 1.1 * prev + 1e-14);
        prev = r;
    }
    CHECK(prev < 1e-10);
}
