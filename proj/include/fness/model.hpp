// model.hpp — driven N-level system, Floquet channels and the Floquet coupling matrix.
//
// The drive is restricted to diagonal zero-mean cosine driving,
//     H_S(t) = sum_j (E_j + c_j * lambda * cos(omega t)) |j><j| ,
// for which the Floquet states are known in closed form: the quasi-energies are
// E_{j nu} = E_j + nu*hbar*omega and each state carries the phase
// exp(-i c_j lambda/(hbar omega) sin(omega t)).
//
// Level indices are zero-based throughout the library; files written by the CLI
// use one-based labels.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <compare>
#include <cstddef>
#include <vector>

namespace fness {

using cdouble = std::complex<double>;

struct SystemSpec {
    std::vector<double> levels;             // bare energies E_j, N >= 2
    double omega{1.35};                     // driving angular frequency
    double lambda_drive{0.5};               // driving strength
    double hbar{1.0};
    double mass{1.0};                       // gas particle mass
    double density{1.0};                    // gas number density
    std::vector<double> coupling_strengths; // V_iota, one per contact scatterer
    Eigen::MatrixXcd overlaps;              // <chi_iota|phi_j>, rows iota, cols j
    std::vector<int> drive_profile;         // c_j

    std::size_t num_levels() const noexcept { return levels.size(); }
    std::size_t num_scatterers() const noexcept { return coupling_strengths.size(); }
};

struct Channel {
    int level{0};
    int nu{0};

    friend auto operator<=>(const Channel&, const Channel&) = default;
};

struct Truncation {
    int nu_cut{8};               // max |nu|
    double e_cut{100.0};         // cutoff kinetic energy of incoming gas particles
    int quad_points{32};         // Gauss-Legendre nodes per momentum panel
    double degeneracy_tol{1e-9};
};

// Three-level toy model: E = (-0.5, 0, 0.4), omega = 1.35, V = (1.0, 0.7, 1.5),
// drive profile (-1, 0, +1) and the symmetric overlap table of the scatterer states.
SystemSpec toy_model(double lambda_drive = 0.5);

// Throws ConfigError when the spec or the truncation violates an invariant, including
// quasi-energy degeneracy inside the truncation window.
void validate(const SystemSpec& spec);
void validate(const Truncation& trunc);
void validate(const SystemSpec& spec, const Truncation& trunc);

double quasi_energy(const SystemSpec& spec, Channel ch);

// sum_iota <phi_a|chi_iota> V_iota <chi_iota|phi_b>
cdouble coupling_base(const SystemSpec& spec, int level_a, int level_b);

// Period average (1/T) int_0^T exp(-i*dnu*omega*t) exp(i*dc*x*sin(omega*t)) dt with
// x = lambda/(hbar*omega), evaluated by the uniform trapezoid rule with `nodes` points.
// Equals the Bessel value J_dnu(dc*x).
cdouble phase_average_factor(const SystemSpec& spec, int dc, int dnu, int nodes);

// Trapezoid node count used by floquet_coupling for index difference dnu and Bessel
// argument k; large enough that aliasing stays below double precision.
int phase_quadrature_nodes(int dnu, double k) noexcept;

// Floquet coupling V^{(j' nu')(j'' nu'')} = phase factor * V^{(j' j'')}.
cdouble floquet_coupling(const SystemSpec& spec, Channel out, Channel in);

} // namespace fness
