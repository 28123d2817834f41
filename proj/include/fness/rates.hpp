// rates.hpp — Floquet transition rates a^nu_{j'j}(beta) by thermal quadrature over the
// incoming momentum, ratio moments, and the beta -> infinity asymptote.
//
// In one dimension the rate integral reduces to
//     a^nu_{j'j} = (N/Z) * 2 * int_0^{p_cut} dp exp(-beta p^2/2m) (m/p~) sum_+- |T(+-p~ (j' nu) <- p (j 0))|^2,
// Z = sqrt(2 pi m / beta); the factor 2 accounts for both incoming directions.
// Every T-solve is independent of beta, so a RateEngine solves once per node and turns
// each beta into a weighted sum.

#pragma once

#include "fness/model.hpp"
#include "fness/quadrature.hpp"
#include "fness/scattering.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

namespace fness {

struct RateTable {
    double beta{0.0};
    std::size_t num_levels{0};
    Truncation trunc;
    std::vector<double> per_nu; // index ((to * N) + from) * (2 nu_cut + 1) + nu + nu_cut
    std::vector<double> totals; // index to * N + from

    static RateTable zeros(std::size_t num_levels, const Truncation& trunc, double beta);

    int nu_cut() const noexcept { return trunc.nu_cut; }
    std::size_t nu_count() const noexcept { return static_cast<std::size_t>(2 * trunc.nu_cut + 1); }
    std::size_t slot(int to, int from, int nu) const;

    // rate j = from -> j' = to absorbing nu quanta; 0 outside the truncation window
    double rate(int to, int from, int nu) const;
    void set_rate(int to, int from, int nu, double value);
    double total(int to, int from) const;
    void refresh_totals();
    double max_rate() const;
    // copy with every rate multiplied by c > 0
    RateTable scaled(double c) const;
};

// Optional persistence layer for node solves; implementations must be deterministic.
class SolveCache {
public:
    virtual ~SolveCache() = default;
    virtual std::optional<Eigen::VectorXcd> lookup(int j_in, double p) = 0;
    virtual void store(int j_in, double p, const Eigen::VectorXcd& t_row) = 0;
};

struct RateOptions {
    double first_piece{0.0};  // first u-piece of each panel; <= 0 selects 0.25 sqrt(m hbar omega)
    unsigned workers{0};      // 0 selects the hardware concurrency
    SolveCache* cache{nullptr};
};

struct SolveStats {
    std::size_t solves{0};
    std::size_t cache_hits{0};
    double max_route_mismatch{0.0};
    double max_optical_residual{0.0};
    double max_edge_ratio{0.0};
    double min_rcond{1.0};
};

class RateEngine {
public:
    RateEngine(SystemSpec spec, Truncation trunc, RateOptions opts = {});

    const Scatterer& scatterer() const noexcept { return scatterer_; }
    const SystemSpec& spec() const noexcept { return scatterer_.spec(); }
    const Truncation& truncation() const noexcept { return scatterer_.truncation(); }
    const SolveStats& stats() const noexcept { return stats_; }
    double p_cut() const noexcept { return p_cut_; }

    // quadrature nodes used for incoming level j_in
    const std::vector<MomentumNode>& nodes(int j_in) const;

    // Rate table at beta > 0 (elastic entries included).
    RateTable table(double beta) const;
    std::vector<RateTable> tables(const std::vector<double>& betas) const;
    double rate(int to, int from, int nu, double beta) const;

    // Same weighted sums without the N/Z prefactor; defined for any real beta and used
    // where only ratios of rates matter (moments and finite differences around beta = 0).
    RateTable unnormalized_table(double beta) const;

    // beta -> infinity asymptote rescaled by beta (see zero_temperature_rates).
    RateTable zero_temperature_table(double p_min = 1e-4, double stability_tol = 1e-3) const;

private:
    void prepare(const RateOptions& opts);
    RateTable weighted(double beta, double prefactor) const;

    Scatterer scatterer_;
    double p_cut_{0.0};
    std::vector<std::vector<MomentumNode>> nodes_;  // per incoming level
    std::vector<Eigen::VectorXd> energies_;         // p^2/2m per node
    std::vector<Eigen::MatrixXd> integrands_;       // (node, channel) weighted integrand
    SolveStats stats_;
};

// Incoming momenta at which channels open for incoming level j_in, including the elastic
// channel at p = 0 (as anchor of the first panel). Channel indices refer to the basis.
std::vector<Threshold> channel_thresholds(const Scatterer& sc, int j_in);

double transition_rate(const SystemSpec& spec, const Truncation& trunc, int to, int from, int nu, double beta);
RateTable rate_table(const SystemSpec& spec, const Truncation& trunc, double beta);

// <exp(beta nu hbar omega)>_{jj'} over the rates j' -> j; throws NumericalError on a zero total.
double exp_moment(const SystemSpec& spec, const RateTable& table, int j, int j_prime);

// d^2/dbeta^2 <exp(beta nu hbar omega)>_{jj'} at beta = 0. Forward second differences on
// the stencil (h, 2h) plus the exact value 1 at beta = 0, Richardson-combined with the
// stencil (2h, 4h); the thermal weight and the explicit exponential move together.
double moment_curvature_at_zero(const RateEngine& engine, int j, int j_prime, double beta_fd);

// Leading beta -> infinity behaviour. In one dimension T vanishes linearly with the
// incoming momentum, so every rate decays as 1/beta; the table holds lim beta * a^nu_{j'j}
// = N m lim_{p->0} (m/p~) sum_+- |T|^2 / p^2 (zero for endothermic and elastic channels).
// Throws ConvergenceError when halving p_min changes a resolved entry beyond stability_tol.
RateTable zero_temperature_rates(const SystemSpec& spec, const Truncation& trunc, double p_min = 1e-4,
                                 double stability_tol = 1e-3);

} // namespace fness
