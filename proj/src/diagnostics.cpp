#include "fness/diagnostics.hpp"

#include "fness/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fness {

BalanceSums floquet_thermalization_sums(const SystemSpec& spec, const RateTable& table, int j) {
    BalanceSums s;
    const int cut = table.nu_cut();
    const double beta = table.beta;
    const double e_j = quasi_energy(spec, {j, 0});
    double out = 0.0;
    for (int jp = 0; jp < static_cast<int>(table.num_levels); ++jp) {
        for (int nu = -cut; nu <= cut; ++nu) {
            // exponents shifted by E_{j0} to keep them O(beta * spread)
            s.lhs += table.rate(j, jp, -nu) * std::exp(-beta * (quasi_energy(spec, {jp, nu}) - e_j));
            out += table.rate(jp, j, nu);
        }
    }
    s.rhs = out;
    if (!(s.lhs + s.rhs > 0.0)) throw NumericalError("thermalization residual: empty rate sums");
    s.residual = 2.0 * std::abs(s.lhs - s.rhs) / (s.lhs + s.rhs);
    return s;
}

double floquet_thermalization_residual(const SystemSpec& spec, const RateTable& table, int j) {
    return floquet_thermalization_sums(spec, table, j).residual;
}

double detailed_balance_ratio(const SystemSpec& spec, const RateTable& table, int j_prime, int j, int nu) {
    const double den_rate = table.rate(j_prime, j, nu);
    if (!(den_rate > kNoiseFloor * table.max_rate())) {
        throw NumericalError("detailed_balance_ratio: denominator rate below the noise floor");
    }
    const double shift = quasi_energy(spec, {j_prime, nu}) - quasi_energy(spec, {j, 0});
    return table.rate(j, j_prime, -nu) * std::exp(-table.beta * shift) / den_rate;
}

double steady_state_moment_residual(const SystemSpec& spec, const RateTable& table, const Populations& ness, int j) {
    double sum = 0.0;
    double scale = 0.0;
    for (int jp = 0; jp < static_cast<int>(table.num_levels); ++jp) {
        const double a = table.total(j, jp);
        if (a == 0.0) continue;
        const double gap = quasi_energy(spec, {jp, 0}) - quasi_energy(spec, {j, 0});
        sum += a * (ness.p(jp) / ness.p(j) - std::exp(-table.beta * gap) * exp_moment(spec, table, j, jp));
        scale += a;
    }
    return scale > 0.0 ? sum / scale : 0.0;
}

std::vector<double> geometric_betas(double largest, double ratio, int count) {
    if (!(largest > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count < 2) {
        throw ConfigError("geometric beta sequence needs largest > 0, 0 < ratio < 1, count >= 2");
    }
    std::vector<double> out;
    double b = largest;
    for (int k = 0; k < count; ++k, b *= ratio) out.push_back(b);
    return out;
}

std::vector<double> default_beta0_sequence(const SystemSpec& spec) {
    std::vector<double> e;
    for (std::size_t j = 0; j < spec.num_levels(); ++j) e.push_back(quasi_energy(spec, {static_cast<int>(j), 0}));
    std::sort(e.begin(), e.end());
    return geometric_betas(0.05 / (e[1] - e[0]), 0.5, 5);
}

Extrapolation extrapolate_to_zero(const std::vector<double>& betas, const std::vector<double>& values, int order) {
    if (betas.size() != values.size()) throw ConfigError("extrapolate_to_zero: size mismatch");
    if (order < 1 || static_cast<std::size_t>(order) + 1 > betas.size()) {
        throw ConfigError("extrapolate_to_zero: need order + 1 samples");
    }
    std::vector<std::size_t> idx(betas.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return betas[a] < betas[b]; });
    const auto k = static_cast<std::size_t>(order) + 1;
    std::vector<double> x(k), p(k);
    for (std::size_t i = 0; i < k; ++i) {
        x[i] = betas[idx[i]];
        p[i] = values[idx[i]];
    }
    // Neville tableau evaluated at 0; column m holds degree-m interpolants
    double prev_best = p[0];
    for (std::size_t m = 1; m < k; ++m) {
        for (std::size_t i = 0; i + m < k; ++i) {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
        if (m + 1 < k) prev_best = p[0];
    }
    Extrapolation e;
    e.value = p[0];
    e.error = std::abs(p[0] - prev_best);
    e.betas = betas;
    e.samples = values;
    if (!std::isfinite(e.value)) throw ConvergenceError("extrapolate_to_zero: non-finite extrapolant");
    return e;
}

namespace {

template <class Fn>
Extrapolation extrapolate(const RateEngine& engine, const std::vector<double>& betas, int order, Fn&& fn) {
    std::vector<double> values;
    values.reserve(betas.size());
    for (double b : betas) values.push_back(fn(engine.table(b)));
    return extrapolate_to_zero(betas, values, order);
}

} // namespace

Extrapolation energy_exchange_beta0(const RateEngine& engine, const std::vector<double>& betas, int order) {
    const int n = static_cast<int>(engine.spec().num_levels());
    return extrapolate(engine, betas, order, [n](const RateTable& t) {
        double num = 0.0;
        double den = 0.0;
        for (int j = 0; j < n; ++j) {
            for (int jp = 0; jp < n; ++jp) {
                if (jp == j) continue;
                for (int nu = -t.nu_cut(); nu <= t.nu_cut(); ++nu) {
                    num += nu * t.rate(jp, j, nu);
                    den += std::abs(nu) * t.rate(jp, j, nu);
                }
            }
        }
        return den > 0.0 ? num / den : 0.0;
    });
}

Extrapolation rate_symmetry_beta0(const RateEngine& engine, const std::vector<double>& betas, int j_prime, int j,
                                  int nu, int order) {
    return extrapolate(engine, betas, order, [=](const RateTable& t) {
        const double floor = kNoiseFloor * t.max_rate();
        const double up = t.rate(j_prime, j, nu);
        const double down = t.rate(j_prime, j, -nu);
        if (!(up > floor) || !(down > floor)) {
            throw NumericalError("rate_symmetry_beta0: rate below the noise floor");
        }
        return up / down;
    });
}

Extrapolation merged_symmetry_residual(const RateEngine& engine, const std::vector<double>& betas, int order) {
    const auto& spec = engine.spec();
    return extrapolate(engine, betas, order, [&spec](const RateTable& t) {
        double worst = 0.0;
        for (int j = 0; j < static_cast<int>(t.num_levels); ++j) {
            worst = std::max(worst, floquet_thermalization_residual(spec, t, j));
        }
        return worst;
    });
}

Extrapolation sum_balance_beta0(const RateEngine& engine, const std::vector<double>& betas, int j, int order) {
    return extrapolate(engine, betas, order, [j](const RateTable& t) {
        double out = 0.0;
        double in = 0.0;
        for (int jp = 0; jp < static_cast<int>(t.num_levels); ++jp) {
            if (jp == j) continue;
            out += t.total(jp, j);
            in += t.total(j, jp);
        }
        if (!(in > 0.0)) throw NumericalError("sum_balance_beta0: vanishing in-sum");
        return out / in;
    });
}

Extrapolation ness_beta0(const RateEngine& engine, const std::vector<double>& betas, int j, int order) {
    return extrapolate(engine, betas, order, [j](const RateTable& t) {
        return steady_state(build_generator(t), t.beta).p(j);
    });
}

} // namespace fness
