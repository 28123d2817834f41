#include "fness/scattering.hpp"

#include "fness/error.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <string>

namespace fness {

using std::numbers::pi;

ChannelBasis::ChannelBasis(std::size_t num_levels, int nu_cut) : num_levels_(num_levels), nu_cut_(nu_cut) {
    if (nu_cut < 0) throw ConfigError("ChannelBasis: nu_cut must be >= 0");
    channels_.reserve(num_levels * static_cast<std::size_t>(2 * nu_cut + 1));
    for (std::size_t j = 0; j < num_levels; ++j) {
        for (int nu = -nu_cut; nu <= nu_cut; ++nu) channels_.push_back({static_cast<int>(j), nu});
    }
}

bool ChannelBasis::contains(Channel ch) const noexcept {
    return ch.level >= 0 && static_cast<std::size_t>(ch.level) < num_levels_ && std::abs(ch.nu) <= nu_cut_;
}

std::size_t ChannelBasis::index(Channel ch) const {
    if (!contains(ch)) {
        throw ConfigError("channel (" + std::to_string(ch.level) + ", " + std::to_string(ch.nu) +
                          ") outside the truncated basis");
    }
    return static_cast<std::size_t>(ch.level) * static_cast<std::size_t>(2 * nu_cut_ + 1) +
           static_cast<std::size_t>(ch.nu + nu_cut_);
}

double relative_residual(double x, double y) noexcept {
    return std::abs(x - y) / (std::abs(x) + std::abs(y) + DBL_MIN);
}

std::optional<double> outgoing_momentum(const SystemSpec& spec, double p, int j_in, Channel out) {
    const double radicand =
        p * p + 2.0 * spec.mass * (quasi_energy(spec, {j_in, 0}) - quasi_energy(spec, out));
    if (radicand <= 0.0) return std::nullopt;
    return std::sqrt(radicand);
}

cdouble green_factor(double mass, double kinetic) {
    if (kinetic == 0.0) throw ThresholdError("green integral evaluated exactly at a channel threshold");
    const double root = std::sqrt(2.0 * mass / std::abs(kinetic));
    // open: -i pi sqrt(2m/dE); closed: sqrt(dE) is positive imaginary, result -pi sqrt(2m/|dE|)
    return kinetic > 0.0 ? cdouble{0.0, -pi * root} : cdouble{-pi * root, 0.0};
}

cdouble green_integral(const SystemSpec& spec, double e_in, Channel ch) {
    return green_factor(spec.mass, e_in - quasi_energy(spec, ch));
}

Scatterer::Scatterer(SystemSpec spec, Truncation trunc, double condition_guard)
    : spec_(std::move(spec)),
      trunc_(trunc),
      basis_(spec_.num_levels(), trunc.nu_cut),
      condition_guard_(condition_guard) {
    validate(spec_, trunc_);
    const auto n = static_cast<Eigen::Index>(basis_.size());
    coupling_.resize(n, n);
    // V^{(j'j'')} and the phase factor depend only on (j', j'', nu' - nu'')
    const int span = 2 * trunc_.nu_cut;
    const auto levels = spec_.num_levels();
    std::vector<cdouble> table(levels * levels * static_cast<std::size_t>(2 * span + 1));
    for (std::size_t a = 0; a < levels; ++a) {
        for (std::size_t b = 0; b < levels; ++b) {
            for (int d = -span; d <= span; ++d) {
                table[(a * levels + b) * static_cast<std::size_t>(2 * span + 1) + static_cast<std::size_t>(d + span)] =
                    floquet_coupling(spec_, {static_cast<int>(a), d}, {static_cast<int>(b), 0});
            }
        }
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        const Channel cr = basis_[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < n; ++c) {
            const Channel cc = basis_[static_cast<std::size_t>(c)];
            const int d = cr.nu - cc.nu;
            coupling_(r, c) = table[(static_cast<std::size_t>(cr.level) * levels + static_cast<std::size_t>(cc.level)) *
                                        static_cast<std::size_t>(2 * span + 1) +
                                    static_cast<std::size_t>(d + span)];
        }
    }
}

std::vector<double> Scatterer::kinetic_energies(double p, int j_in, int anchor, double u) const {
    const double e_in = p * p / (2.0 * spec_.mass) + quasi_energy(spec_, {j_in, 0});
    std::vector<double> kin(basis_.size());
    for (std::size_t c = 0; c < basis_.size(); ++c) {
        kin[c] = (static_cast<int>(c) == anchor) ? u * u / (2.0 * spec_.mass)
                                                 : e_in - quasi_energy(spec_, basis_[c]);
    }
    return kin;
}

Eigen::MatrixXcd Scatterer::system_matrix(double p, int j_in) const {
    const auto kin = kinetic_energies(p, j_in);
    const auto n = static_cast<Eigen::Index>(basis_.size());
    Eigen::MatrixXcd a = -coupling_;
    for (Eigen::Index r = 0; r < n; ++r) {
        a.row(r) *= green_factor(spec_.mass, kin[static_cast<std::size_t>(r)]);
        a(r, r) += std::sqrt(2.0 * pi * spec_.hbar);
    }
    return a;
}

ScatteringSolution Scatterer::solve(double p, int j_in) const {
    return solve_impl(p, j_in, kinetic_energies(p, j_in));
}

ScatteringSolution Scatterer::solve_anchored(double p, int j_in, int anchor, double u) const {
    return solve_impl(p, j_in, kinetic_energies(p, j_in, anchor, u));
}

ScatteringSolution Scatterer::solve_impl(double p, int j_in, const std::vector<double>& kin) const {
    if (j_in < 0 || static_cast<std::size_t>(j_in) >= spec_.num_levels()) {
        throw ConfigError("solve: incoming level out of range");
    }
    const auto n = static_cast<Eigen::Index>(basis_.size());
    Eigen::MatrixXcd a = -coupling_;
    for (Eigen::Index r = 0; r < n; ++r) {
        a.row(r) *= green_factor(spec_.mass, kin[static_cast<std::size_t>(r)]);
        a(r, r) += std::sqrt(2.0 * pi * spec_.hbar);
    }
    const auto in = static_cast<Eigen::Index>(basis_.index({j_in, 0}));
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs(in) = 1.0;

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    ScatteringSolution sol;
    sol.rcond = lu.rcond();
    if (!(sol.rcond * condition_guard_ >= 1.0)) {
        throw NumericalError("solve: Lippmann-Schwinger matrix ill-conditioned (cond ~ " +
                             std::to_string(1.0 / sol.rcond) + ") at p = " + std::to_string(p));
    }
    sol.p_in = p;
    sol.j_in = j_in;
    sol.psi = lu.solve(rhs);
    sol.t_row = coupling_ * sol.psi;
    sol.open_flags.resize(basis_.size());
    sol.p_out.resize(basis_.size());
    for (std::size_t c = 0; c < basis_.size(); ++c) {
        const bool open = kin[c] > 0.0;
        sol.open_flags[c] = open;
        sol.p_out[c] = open ? std::sqrt(2.0 * spec_.mass * kin[c]) : 0.0;
    }
    return sol;
}

Eigen::VectorXcd Scatterer::t_route_v2(const ScatteringSolution& sol) const {
    const auto kin = kinetic_energies(sol.p_in, sol.j_in);
    const auto in = basis_.index({sol.j_in, 0});
    Eigen::VectorXcd t(static_cast<Eigen::Index>(basis_.size()));
    const double root = std::sqrt(2.0 * pi * spec_.hbar);
    for (std::size_t c = 0; c < basis_.size(); ++c) {
        const auto i = static_cast<Eigen::Index>(c);
        const cdouble lhs = root * sol.psi(i) - (c == in ? 1.0 : 0.0);
        t(i) = lhs / green_factor(spec_.mass, kin[c]);
    }
    return t;
}

double Scatterer::route_mismatch(const ScatteringSolution& sol) const {
    const Eigen::VectorXcd v2 = t_route_v2(sol);
    const double scale = sol.t_row.cwiseAbs().maxCoeff();
    if (scale == 0.0) return (v2.cwiseAbs().maxCoeff() == 0.0) ? 0.0 : 1.0;
    return (sol.t_row - v2).cwiseAbs().maxCoeff() / scale;
}

cdouble Scatterer::t_element(const ScatteringSolution& sol, std::size_t channel, int direction) const {
    // exp(-i s p~ q / hbar) with q = 0 for every scatterer
    constexpr double q = 0.0;
    const double phase = -direction * sol.p_out[channel] * q / spec_.hbar;
    return sol.t_row(static_cast<Eigen::Index>(channel)) * std::polar(1.0, phase);
}

UnitarityReport Scatterer::unitarity(double p, int j_in, bool with_reverse) const {
    if (!(p > 0.0)) throw ConfigError("unitarity: p must be > 0");
    const ScatteringSolution sol = solve(p, j_in);
    const auto in = basis_.index({j_in, 0});
    const double flux = 2.0 * pi * spec_.mass;

    UnitarityReport rep;
    rep.im_diag = sol.t_row(static_cast<Eigen::Index>(in)).imag();
    for (std::size_t c = 0; c < basis_.size(); ++c) {
        if (!sol.open_flags[c]) continue;
        const double plus = std::norm(t_element(sol, c, +1));
        const double minus = std::norm(t_element(sol, c, -1));
        if (std::abs(plus - minus) > 1e-12 * std::max(plus, 1e-300)) {
            throw NumericalError("unitarity: T depends on the outgoing direction");
        }
        rep.forward_sum += flux / sol.p_out[c] * (plus + minus);
    }
    rep.first_residual = relative_residual(-2.0 * rep.im_diag, rep.forward_sum);

    if (with_reverse) {
        // <p (j,0)|T|p~ (j'',nu'')> = <p (j,-nu'')|T|p~ (j'',0)> by Brillouin translation
        for (std::size_t c = 0; c < basis_.size(); ++c) {
            if (!sol.open_flags[c]) continue;
            const Channel mid = basis_[c];
            const ScatteringSolution back = solve(sol.p_out[c], mid.level);
            const auto target = basis_.index({j_in, -mid.nu});
            const double plus = std::norm(t_element(back, target, +1));
            const double minus = std::norm(t_element(back, target, -1));
            rep.reverse_sum += flux / sol.p_out[c] * (plus + minus);
        }
        rep.second_residual = relative_residual(-2.0 * rep.im_diag, rep.reverse_sum);
        rep.merged_residual = relative_residual(rep.forward_sum, rep.reverse_sum);
    }
    return rep;
}

double Scatterer::edge_ratio(const ScatteringSolution& sol) const {
    double edge = 0.0;
    double all = 0.0;
    const int cut = trunc_.nu_cut;
    for (std::size_t c = 0; c < basis_.size(); ++c) {
        if (!sol.open_flags[c]) continue;
        const double mag = std::abs(sol.t_row(static_cast<Eigen::Index>(c)));
        all = std::max(all, mag);
        if (std::abs(basis_[c].nu) >= cut - 1) edge = std::max(edge, mag);
    }
    return all > 0.0 ? edge / all : 0.0;
}

Eigen::MatrixXcd build_system(const SystemSpec& spec, const Truncation& trunc, double p, int j_in) {
    return Scatterer(spec, trunc).system_matrix(p, j_in);
}

ScatteringSolution solve_amplitudes(const SystemSpec& spec, const Truncation& trunc, double p, int j_in) {
    return Scatterer(spec, trunc).solve(p, j_in);
}

Eigen::VectorXcd t_matrix_elements(const ScatteringSolution& sol, const SystemSpec& spec,
                                   const Truncation& trunc) {
    const Scatterer sc(spec, trunc);
    const double mismatch = sc.route_mismatch(sol);
    if (!(mismatch <= Scatterer::kRouteTolerance)) {
        throw NumericalError("t_matrix_elements: routes v1 and v2 disagree (" + std::to_string(mismatch) + ")");
    }
    return sol.t_row;
}

double optical_theorem_residual(const SystemSpec& spec, const Truncation& trunc, double p, Channel in) {
    if (in.nu != 0) throw ConfigError("optical_theorem_residual: incoming Floquet index must be 0");
    return Scatterer(spec, trunc).unitarity(p, in.level, false).first_residual;
}

} // namespace fness
