#include "fness/rates.hpp"

#include "fness/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>

namespace fness {

using std::numbers::pi;

// ---- RateTable -------------------------------------------------------------------------

RateTable RateTable::zeros(std::size_t num_levels, const Truncation& trunc, double beta) {
    RateTable t;
    t.beta = beta;
    t.num_levels = num_levels;
    t.trunc = trunc;
    t.per_nu.assign(num_levels * num_levels * t.nu_count(), 0.0);
    t.totals.assign(num_levels * num_levels, 0.0);
    return t;
}

std::size_t RateTable::slot(int to, int from, int nu) const {
    if (to < 0 || from < 0 || static_cast<std::size_t>(to) >= num_levels ||
        static_cast<std::size_t>(from) >= num_levels) {
        throw ConfigError("RateTable: level index out of range");
    }
    if (std::abs(nu) > trunc.nu_cut) throw ConfigError("RateTable: nu outside the truncation");
    return (static_cast<std::size_t>(to) * num_levels + static_cast<std::size_t>(from)) * nu_count() +
           static_cast<std::size_t>(nu + trunc.nu_cut);
}

double RateTable::rate(int to, int from, int nu) const {
    if (std::abs(nu) > trunc.nu_cut) return 0.0;
    return per_nu[slot(to, from, nu)];
}

void RateTable::set_rate(int to, int from, int nu, double value) { per_nu[slot(to, from, nu)] = value; }

double RateTable::total(int to, int from) const {
    if (to < 0 || from < 0 || static_cast<std::size_t>(to) >= num_levels ||
        static_cast<std::size_t>(from) >= num_levels) {
        throw ConfigError("RateTable: level index out of range");
    }
    return totals[static_cast<std::size_t>(to) * num_levels + static_cast<std::size_t>(from)];
}

void RateTable::refresh_totals() {
    const auto n = nu_count();
    for (std::size_t k = 0; k < totals.size(); ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += per_nu[k * n + i];
        totals[k] = sum;
    }
}

double RateTable::max_rate() const {
    return per_nu.empty() ? 0.0 : *std::max_element(per_nu.begin(), per_nu.end());
}

RateTable RateTable::scaled(double c) const {
    if (!(c > 0.0)) throw ConfigError("RateTable::scaled: factor must be > 0");
    RateTable out = *this;
    for (double& v : out.per_nu) v *= c;
    out.refresh_totals();
    return out;
}

// ---- thresholds and node solves --------------------------------------------------------

std::vector<Threshold> channel_thresholds(const Scatterer& sc, int j_in) {
    const auto& spec = sc.spec();
    const auto& basis = sc.basis();
    const double e0 = quasi_energy(spec, {j_in, 0});
    std::vector<Threshold> out;
    out.push_back({0.0, static_cast<int>(basis.index({j_in, 0}))});
    for (std::size_t c = 0; c < basis.size(); ++c) {
        const double gap = quasi_energy(spec, basis[c]) - e0;
        if (gap > 0.0) out.push_back({std::sqrt(2.0 * spec.mass * gap), static_cast<int>(c)});
    }
    return out;
}

namespace {

struct NodeResult {
    Eigen::VectorXcd t_row;
    double mismatch{0.0};
    double optical{0.0};
    double edge{0.0};
    double rcond{1.0};
    bool fresh{false};
};

// Solve at a quadrature node, displacing the momentum slightly if it hits a threshold.
ScatteringSolution node_solve(const Scatterer& sc, int j_in, const MomentumNode& node) {
    double p = node.p;
    double u = node.u;
    const double scale = std::max(1.0, p);
    for (int attempt = 0; attempt < 5; ++attempt) {
        try {
            return node.anchor >= 0 ? sc.solve_anchored(p, j_in, node.anchor, u) : sc.solve(p, j_in);
        } catch (const ThresholdError&) {
            const double delta = ((attempt % 2 == 0) ? 1.0 : -1.0) * 1e-9 * scale * (1 + attempt / 2);
            p = node.p + delta;
            u = std::sqrt(std::max(0.0, node.u * node.u + (2.0 * node.p + delta) * delta));
        }
    }
    throw ThresholdError("node solve: threshold collision persists after displacement at p = " +
                         std::to_string(node.p));
}

double optical_from_row(const Scatterer& sc, const ScatteringSolution& sol) {
    const auto in = static_cast<Eigen::Index>(sc.basis().index({sol.j_in, 0}));
    double rhs = 0.0;
    for (std::size_t c = 0; c < sol.open_flags.size(); ++c) {
        if (!sol.open_flags[c]) continue;
        rhs += 2.0 * pi * sc.spec().mass / sol.p_out[c] * 2.0 * std::norm(sol.t_row(static_cast<Eigen::Index>(c)));
    }
    return relative_residual(-2.0 * sol.t_row(in).imag(), rhs);
}

template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace

namespace {
RateTable zero_temperature_impl(const Scatterer& scatterer_, double p_min, double stability_tol);
} // namespace

// ---- RateEngine ------------------------------------------------------------------------

RateEngine::RateEngine(SystemSpec spec, Truncation trunc, RateOptions opts)
    : scatterer_(std::move(spec), trunc) {
    p_cut_ = std::sqrt(2.0 * scatterer_.spec().mass * trunc.e_cut);
    prepare(opts);
}

const std::vector<MomentumNode>& RateEngine::nodes(int j_in) const {
    if (j_in < 0 || static_cast<std::size_t>(j_in) >= nodes_.size()) {
        throw ConfigError("RateEngine::nodes: level out of range");
    }
    return nodes_[static_cast<std::size_t>(j_in)];
}

void RateEngine::prepare(const RateOptions& opts) {
    const auto& spec = scatterer_.spec();
    const auto& basis = scatterer_.basis();
    const double h = opts.first_piece > 0.0 ? opts.first_piece : 0.25 * std::sqrt(spec.mass * spec.hbar * spec.omega);
    const std::size_t levels = spec.num_levels();
    const auto nch = static_cast<Eigen::Index>(basis.size());

    nodes_.resize(levels);
    energies_.resize(levels);
    integrands_.resize(levels);

    // flat task list (level, node) so the worker pool sees all solves at once
    std::vector<std::pair<int, std::size_t>> tasks;
    for (std::size_t j = 0; j < levels; ++j) {
        nodes_[j] = momentum_grid(channel_thresholds(scatterer_, static_cast<int>(j)), p_cut_,
                                  truncation().quad_points, h);
        for (std::size_t n = 0; n < nodes_[j].size(); ++n) tasks.emplace_back(static_cast<int>(j), n);
    }

    std::vector<NodeResult> results(tasks.size());
    if (opts.cache != nullptr) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& node = nodes_[static_cast<std::size_t>(tasks[i].first)][tasks[i].second];
            if (auto hit = opts.cache->lookup(tasks[i].first, node.p); hit && hit->size() == nch) {
                results[i].t_row = std::move(*hit);
            }
        }
    }

    parallel_for(tasks.size(), opts.workers, [&](std::size_t i) {
        NodeResult& r = results[i];
        if (r.t_row.size() == nch) return;
        const auto& node = nodes_[static_cast<std::size_t>(tasks[i].first)][tasks[i].second];
        const ScatteringSolution sol = node_solve(scatterer_, tasks[i].first, node);
        r.mismatch = scatterer_.route_mismatch(sol);
        r.optical = optical_from_row(scatterer_, sol);
        r.edge = scatterer_.edge_ratio(sol);
        r.rcond = sol.rcond;
        r.t_row = sol.t_row;
        r.fresh = true;
    });

    // ordered aggregation: identical results regardless of worker count
    for (std::size_t j = 0; j < levels; ++j) {
        const auto count = static_cast<Eigen::Index>(nodes_[j].size());
        energies_[j].resize(count);
        integrands_[j].setZero(count, nch);
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const int j_in = tasks[i].first;
        const auto row = static_cast<Eigen::Index>(tasks[i].second);
        const auto& node = nodes_[static_cast<std::size_t>(j_in)][tasks[i].second];
        NodeResult& r = results[i];
        if (r.fresh) {
            ++stats_.solves;
            stats_.max_route_mismatch = std::max(stats_.max_route_mismatch, r.mismatch);
            stats_.max_optical_residual = std::max(stats_.max_optical_residual, r.optical);
            stats_.max_edge_ratio = std::max(stats_.max_edge_ratio, r.edge);
            stats_.min_rcond = std::min(stats_.min_rcond, r.rcond);
            if (opts.cache != nullptr) opts.cache->store(j_in, node.p, r.t_row);
        } else {
            ++stats_.cache_hits;
        }
        energies_[static_cast<std::size_t>(j_in)](row) = node.p * node.p / (2.0 * spec.mass);
        const auto kin = scatterer_.kinetic_energies(node.p, j_in, node.anchor, node.u);
        for (Eigen::Index c = 0; c < nch; ++c) {
            const double k = kin[static_cast<std::size_t>(c)];
            if (!(k > 0.0)) continue;
            // sum over both outgoing directions; direction-independent for scatterers at the origin
            const double t2 = 2.0 * std::norm(r.t_row(c));
            double w = 0.0;
            if (c == node.anchor) {
                // (m/p~) dp = (m/u) (u/p) du = (m/p) du
                w = node.weight_du * spec.mass / node.p;
            } else {
                w = node.weight_dp * spec.mass / std::sqrt(2.0 * spec.mass * k);
            }
            integrands_[static_cast<std::size_t>(j_in)](row, c) = w * t2;
        }
    }
    if (!(stats_.max_route_mismatch <= Scatterer::kRouteTolerance)) {
        throw NumericalError("rates: T-matrix routes disagree by " + std::to_string(stats_.max_route_mismatch));
    }
}

RateTable RateEngine::weighted(double beta, double prefactor) const {
    const auto& basis = scatterer_.basis();
    const std::size_t levels = spec().num_levels();
    RateTable table = RateTable::zeros(levels, truncation(), beta);
    for (std::size_t j = 0; j < levels; ++j) {
        const Eigen::VectorXd boltz = (-beta * energies_[j].array()).exp();
        const Eigen::VectorXd sums = integrands_[j].transpose() * boltz;
        for (std::size_t c = 0; c < basis.size(); ++c) {
            // factor 2: incoming momenta of both signs
            table.set_rate(basis[c].level, static_cast<int>(j), basis[c].nu,
                           2.0 * prefactor * sums(static_cast<Eigen::Index>(c)));
        }
    }
    table.refresh_totals();
    return table;
}

RateTable RateEngine::table(double beta) const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("rates: beta must be finite and > 0");
    const double z = std::sqrt(2.0 * pi * spec().mass / beta);
    return weighted(beta, spec().density / z);
}

std::vector<RateTable> RateEngine::tables(const std::vector<double>& betas) const {
    std::vector<RateTable> out;
    out.reserve(betas.size());
    for (double b : betas) out.push_back(table(b));
    return out;
}

double RateEngine::rate(int to, int from, int nu, double beta) const { return table(beta).rate(to, from, nu); }

RateTable RateEngine::unnormalized_table(double beta) const {
    if (!std::isfinite(beta)) throw ConfigError("rates: beta must be finite");
    return weighted(beta, 1.0);
}

RateTable RateEngine::zero_temperature_table(double p_min, double stability_tol) const {
    return zero_temperature_impl(scatterer_, p_min, stability_tol);
}

namespace {

RateTable zero_temperature_impl(const Scatterer& scatterer_, double p_min, double stability_tol) {
    if (!(p_min > 0.0)) throw ConfigError("zero_temperature_rates: p_min must be > 0");
    const auto& sp = scatterer_.spec();
    const auto& basis = scatterer_.basis();
    const std::size_t levels = sp.num_levels();
    RateTable table = RateTable::zeros(levels, scatterer_.truncation(), std::numeric_limits<double>::infinity());

    // C(p) = (m/p~) sum_+- |T|^2 / p^2; Richardson removes the O(p) correction
    auto coefficients = [&](int j_in, double p) {
        const ScatteringSolution sol = scatterer_.solve(p, j_in);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
        for (std::size_t c = 0; c < basis.size(); ++c) {
            if (!sol.open_flags[c]) continue;
            out(static_cast<Eigen::Index>(c)) =
                sp.mass / sol.p_out[c] * 2.0 * std::norm(sol.t_row(static_cast<Eigen::Index>(c))) / (p * p);
        }
        return out;
    };

    std::vector<Eigen::VectorXd> coarse(levels), fine(levels);
    double scale = 0.0;
    for (std::size_t j = 0; j < levels; ++j) {
        const int jj = static_cast<int>(j);
        const Eigen::VectorXd c1 = coefficients(jj, p_min);
        const Eigen::VectorXd c2 = coefficients(jj, 0.5 * p_min);
        const Eigen::VectorXd c4 = coefficients(jj, 0.25 * p_min);
        coarse[j] = 2.0 * c2 - c1;
        fine[j] = 2.0 * c4 - c2;
        const auto elastic = static_cast<Eigen::Index>(basis.index({jj, 0}));
        coarse[j](elastic) = 0.0;
        fine[j](elastic) = 0.0;
        scale = std::max(scale, fine[j].maxCoeff());
    }
    for (std::size_t j = 0; j < levels; ++j) {
        const double e0 = quasi_energy(sp, {static_cast<int>(j), 0});
        for (std::size_t c = 0; c < basis.size(); ++c) {
            const auto i = static_cast<Eigen::Index>(c);
            // endothermic channels are closed at vanishing incoming energy
            if (!(quasi_energy(sp, basis[c]) < e0)) continue;
            const double a = fine[j](i);
            if (a > 1e-10 * scale && std::abs(a - coarse[j](i)) > stability_tol * a) {
                throw ConvergenceError("zero_temperature_rates: limit unstable under p_min halving");
            }
            table.set_rate(basis[c].level, static_cast<int>(j), basis[c].nu, sp.density * sp.mass * a);
        }
    }
    table.refresh_totals();
    return table;
}

} // namespace

// ---- free functions --------------------------------------------------------------------

double transition_rate(const SystemSpec& spec, const Truncation& trunc, int to, int from, int nu, double beta) {
    return rate_table(spec, trunc, beta).rate(to, from, nu);
}

RateTable rate_table(const SystemSpec& spec, const Truncation& trunc, double beta) {
    if (!(beta > 0.0)) throw ConfigError("rates: beta must be > 0");
    return RateEngine(spec, trunc).table(beta);
}

double exp_moment(const SystemSpec& spec, const RateTable& table, int j, int j_prime) {
    double num = 0.0;
    double den = 0.0;
    const double beta = std::isfinite(table.beta) ? table.beta : 0.0;
    for (int nu = -table.nu_cut(); nu <= table.nu_cut(); ++nu) {
        const double a = table.rate(j, j_prime, nu);
        num += a * std::exp(beta * nu * spec.hbar * spec.omega);
        den += a;
    }
    if (!(den > 0.0)) throw NumericalError("exp_moment: total rate vanishes, moment undefined");
    return num / den;
}

double moment_curvature_at_zero(const RateEngine& engine, int j, int j_prime, double beta_fd) {
    if (!(beta_fd > 0.0)) throw ConfigError("moment_curvature_at_zero: beta_fd must be > 0");
    const auto& spec = engine.spec();
    auto moment = [&](double b) {
        RateTable t = engine.unnormalized_table(b);
        return exp_moment(spec, t, j, j_prime);
    };
    const double h = beta_fd;
    const double m1 = moment(h);
    const double m2 = moment(2.0 * h);
    const double m4 = moment(4.0 * h);
    const double d_fine = (m2 - 2.0 * m1 + 1.0) / (h * h);
    const double d_coarse = (m4 - 2.0 * m2 + 1.0) / (4.0 * h * h);
    return 2.0 * d_fine - d_coarse;
}

RateTable zero_temperature_rates(const SystemSpec& spec, const Truncation& trunc, double p_min,
                                 double stability_tol) {
    return zero_temperature_impl(Scatterer(spec, trunc), p_min, stability_tol);
}

} // namespace fness
