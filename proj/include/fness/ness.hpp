// ness.hpp — Pauli generator, steady state, population dynamics and the high-temperature
// expansion of the steady state.

#pragma once

#include "fness/model.hpp"
#include "fness/rates.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fness {

struct Populations {
    double beta{0.0};
    Eigen::VectorXd p;
};

// W(j, j') = a_{jj'} for j != j', W(j, j) = -sum_{j' != j} a_{j'j}; columns sum to zero.
Eigen::MatrixXd build_generator(const RateTable& table);

// Normalized kernel of W. Throws NumericalError when the kernel is not one-dimensional
// or the stationarity residual exceeds 1e-10 max(1, |W|).
Populations steady_state(const Eigen::MatrixXd& w, double beta = 0.0);

// Fixed-step RK4 integration of dp/dt = W p; returns the states at t = 0, dt, ..., t_final.
std::vector<Populations> evolve(const Eigen::MatrixXd& w, const Populations& p0, double t_final, double dt);

// p_j proportional to exp(-beta E^QE_{j0}); beta = +inf selects the ground level.
Populations boltzmann(const SystemSpec& spec, double beta);

// Least-squares slope of ln(p_{j'} / p_j) against beta over the grid, fitted through the
// origin (the populations are uniform at beta = 0).
double high_t_slope(const RateEngine& engine, int j, int j_prime, const std::vector<double>& beta_grid);
// Default grid {0.02, 0.04, 0.06, 0.08} / (E^QE_{20} - E^QE_{10}) (gap of the two lowest levels).
std::vector<double> default_slope_grid(const SystemSpec& spec);

// 2 (E^QE_{j'0} - E^QE_{j0}) / (curvature + (E^QE_{j'0} - E^QE_{j0})^2)
double thermal_domain_bound(const SystemSpec& spec, double curvature, int j, int j_prime);
double thermal_domain_bound(const RateEngine& engine, int j, int j_prime, double beta_fd);

} // namespace fness
