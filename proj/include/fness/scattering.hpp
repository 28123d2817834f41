// scattering.hpp — truncated Floquet Lippmann-Schwinger system for contact scatterers at
// the origin, on-shell T-matrix extraction and unitarity (optical theorem) residuals.
//
// With all scatterers at x = 0 the integral equation collapses to the linear system
//     sum_c'' A_{c c''}(p) Psi_c'' = delta_{c, (j_in, 0)},
//     A_{c c''} = sqrt(2 pi hbar) delta_{c c''} - g_c(E_in) V_{c c''},
// where g_c is the analytic 1D Green integral of channel c and V the Floquet coupling.
// The on-shell elements follow as T_c = (V Psi)_c, or equivalently
// T_c = (sqrt(2 pi hbar) Psi_c - delta_{c, in}) / g_c.

#pragma once

#include "fness/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace fness {

// All channels (j, nu), 0 <= j < N, |nu| <= nu_cut; j-major, nu ascending.
class ChannelBasis {
public:
    ChannelBasis(std::size_t num_levels, int nu_cut);

    std::size_t size() const noexcept { return channels_.size(); }
    int nu_cut() const noexcept { return nu_cut_; }
    std::size_t num_levels() const noexcept { return num_levels_; }
    const Channel& operator[](std::size_t i) const { return channels_[i]; }
    const std::vector<Channel>& channels() const noexcept { return channels_; }

    bool contains(Channel ch) const noexcept;
    std::size_t index(Channel ch) const; // throws ConfigError when outside the basis

private:
    std::size_t num_levels_;
    int nu_cut_;
    std::vector<Channel> channels_;
};

struct ScatteringSolution {
    double p_in{0.0};
    int j_in{0};                     // incoming Floquet index is always 0
    Eigen::VectorXcd psi;            // amplitudes over the basis
    Eigen::VectorXcd t_row;          // route-v1 elements for every channel (closed ones are off-shell)
    std::vector<bool> open_flags;    // channel open iff its outgoing momentum is real and > 0
    std::vector<double> p_out;       // outgoing momentum, 0 for closed channels
    double rcond{0.0};               // reciprocal condition estimate of A
};

struct UnitarityReport {
    double im_diag{0.0};        // Im T(p,in; p,in)
    double forward_sum{0.0};    // 2 pi m sum_open 1/p~ sum_+- |T(out <- in)|^2
    double reverse_sum{0.0};    // same with reversed arguments (Brillouin-shifted solves)
    double first_residual{0.0};
    double second_residual{0.0};
    double merged_residual{0.0};
};

// |x - y| / (|x| + |y| + floor); 0 when both vanish.
double relative_residual(double x, double y) noexcept;

// Outgoing momentum for channel `out` of a particle arriving with momentum p in (j_in, 0);
// nullopt when the channel is closed (radicand <= 0).
std::optional<double> outgoing_momentum(const SystemSpec& spec, double p, int j_in, Channel out);

// Analytic value of int dp' / (dE - p'^2/2m + i0): -i pi sqrt(2m/dE) with the branch of
// the square root real-positive or positive-imaginary. Throws ThresholdError at dE == 0.
cdouble green_factor(double mass, double kinetic);
cdouble green_integral(const SystemSpec& spec, double e_in, Channel ch);

// Precomputes the channel basis and Floquet coupling matrix for one (spec, truncation).
class Scatterer {
public:
    static constexpr double kDefaultConditionGuard = 1e12;
    static constexpr double kRouteTolerance = 1e-8;

    Scatterer(SystemSpec spec, Truncation trunc, double condition_guard = kDefaultConditionGuard);

    const SystemSpec& spec() const noexcept { return spec_; }
    const Truncation& truncation() const noexcept { return trunc_; }
    const ChannelBasis& basis() const noexcept { return basis_; }
    const Eigen::MatrixXcd& coupling() const noexcept { return coupling_; }

    // Kinetic energy left for channel c: E_in - E^QE_c. When `anchor` names a channel,
    // that channel's value is taken as u^2/2m exactly.
    std::vector<double> kinetic_energies(double p, int j_in, int anchor = -1, double u = 0.0) const;

    Eigen::MatrixXcd system_matrix(double p, int j_in) const;
    ScatteringSolution solve(double p, int j_in) const;
    // Same solve with exact kinematics for the channel that opens at the panel start.
    ScatteringSolution solve_anchored(double p, int j_in, int anchor, double u) const;

    // Route v2 of the T extraction for every channel.
    Eigen::VectorXcd t_route_v2(const ScatteringSolution& sol) const;
    // Largest |v1 - v2| relative to the largest |T| of the row.
    double route_mismatch(const ScatteringSolution& sol) const;

    // T element for an outgoing direction sign (+1/-1). With all scatterers at the origin
    // the direction phase is unity.
    cdouble t_element(const ScatteringSolution& sol, std::size_t channel, int direction) const;

    UnitarityReport unitarity(double p, int j_in, bool with_reverse = true) const;

    // max |T| over the two outermost |nu| shells divided by max |T| over all open channels.
    double edge_ratio(const ScatteringSolution& sol) const;

private:
    ScatteringSolution solve_impl(double p, int j_in, const std::vector<double>& kinetic) const;

    SystemSpec spec_;
    Truncation trunc_;
    ChannelBasis basis_;
    Eigen::MatrixXcd coupling_;
    double condition_guard_;
};

Eigen::MatrixXcd build_system(const SystemSpec& spec, const Truncation& trunc, double p, int j_in);
ScatteringSolution solve_amplitudes(const SystemSpec& spec, const Truncation& trunc, double p, int j_in);
// Route-v1 elements after asserting agreement with route v2 (throws NumericalError).
Eigen::VectorXcd t_matrix_elements(const ScatteringSolution& sol, const SystemSpec& spec,
                                   const Truncation& trunc);
double optical_theorem_residual(const SystemSpec& spec, const Truncation& trunc, double p, Channel in);

} // namespace fness
