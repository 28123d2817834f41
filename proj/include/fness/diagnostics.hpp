// diagnostics.hpp — numeric residuals of the unitarity-derived identities: Floquet
// thermalization conditions, pairwise detailed balance, and the beta -> 0 statements
// (uniform steady state, zero energy exchange, rate symmetry, sum balance).
//
// beta = 0 cannot be integrated directly (Z diverges), so every beta -> 0 claim is
// evaluated on a geometric beta sequence and extrapolated by Neville's algorithm.

#pragma once

#include "fness/model.hpp"
#include "fness/ness.hpp"
#include "fness/rates.hpp"

#include <vector>

namespace fness {

inline constexpr double kNoiseFloor = 1e-10; // relative to the largest rate of a table

struct BalanceSums {
    double lhs{0.0};
    double rhs{0.0};
    double residual{0.0}; // 2 |lhs - rhs| / (lhs + rhs)
};

// Summed Floquet thermalization condition for level j, elastic terms included:
//   lhs = sum_{j', nu} a^{-nu}_{j j'} exp(-beta E^QE_{j' nu}),  rhs = exp(-beta E^QE_{j0}) sum_{j', nu} a^{nu}_{j' j}.
BalanceSums floquet_thermalization_sums(const SystemSpec& spec, const RateTable& table, int j);
double floquet_thermalization_residual(const SystemSpec& spec, const RateTable& table, int j);

// (a^{-nu}_{j j'} exp(-beta E^QE_{j' nu})) / (exp(-beta E^QE_{j0}) a^{nu}_{j' j}); throws NumericalError
// when the denominator rate is below the noise floor.
double detailed_balance_ratio(const SystemSpec& spec, const RateTable& table, int j_prime, int j, int nu);

// sum_{j'} a_{jj'} (p_{j'}/p_j - exp(-beta (E^QE_{j'0} - E^QE_{j0})) <exp(beta nu hbar omega)>_{jj'}),
// elastic j' = j included, divided by sum_{j'} a_{jj'}.
double steady_state_moment_residual(const SystemSpec& spec, const RateTable& table, const Populations& ness, int j);

struct Extrapolation {
    double value{0.0};
    double error{0.0};            // difference between the two highest-order estimates
    std::vector<double> betas;
    std::vector<double> samples;
};

// Geometric sequence largest, largest*ratio, ... (count points).
std::vector<double> geometric_betas(double largest, double ratio, int count);
// Default: 5 points, ratio 1/2, largest 0.05 / (E^QE_{20} - E^QE_{10}).
std::vector<double> default_beta0_sequence(const SystemSpec& spec);

// Polynomial extrapolation to beta = 0 through the order + 1 smallest betas.
Extrapolation extrapolate_to_zero(const std::vector<double>& betas, const std::vector<double>& values, int order = 1);

// (sum nu a^nu_{j'j}) / (sum |nu| a^nu_{j'j}) over j' != j, extrapolated to beta = 0.
Extrapolation energy_exchange_beta0(const RateEngine& engine, const std::vector<double>& betas, int order = 1);
// a^nu_{j'j} / a^{-nu}_{j'j} extrapolated to beta = 0; throws NumericalError below the noise floor.
Extrapolation rate_symmetry_beta0(const RateEngine& engine, const std::vector<double>& betas, int j_prime, int j,
                                  int nu, int order = 1);
// max_j of the thermalization residual, extrapolated to beta = 0.
Extrapolation merged_symmetry_residual(const RateEngine& engine, const std::vector<double>& betas, int order = 1);
// out-sum / in-sum of total rates for level j (j' != j), extrapolated to beta = 0.
Extrapolation sum_balance_beta0(const RateEngine& engine, const std::vector<double>& betas, int j, int order = 1);
// steady-state population of level j extrapolated to beta = 0.
Extrapolation ness_beta0(const RateEngine& engine, const std::vector<double>& betas, int j, int order = 1);

} // namespace fness
