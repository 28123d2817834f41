#include "fness/ness.hpp"

#include "fness/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fness {

Eigen::MatrixXd build_generator(const RateTable& table) {
    const auto n = static_cast<Eigen::Index>(table.num_levels);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < n; ++k) {
            if (j == k) continue;
            w(j, k) = table.total(static_cast<int>(j), static_cast<int>(k));
        }
    }
    // outflow on the diagonal so each column sums to zero
    for (Eigen::Index k = 0; k < n; ++k) {
        double out = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != k) out += w(j, k);
        }
        w(k, k) = -out;
    }
    return w;
}

Populations steady_state(const Eigen::MatrixXd& w, double beta) {
    const auto n = w.rows();
    if (n == 0 || w.cols() != n) throw ConfigError("steady_state: generator must be square and non-empty");
    const double norm = w.cwiseAbs().colwise().sum().maxCoeff();
    if (n > 1) {
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues();
        if (!(sv(n - 2) > 1e-12 * norm)) {
            throw NumericalError("steady_state: generator kernel is not one-dimensional (disconnected rates)");
        }
    }
    Eigen::Index row = 0;
    w.diagonal().cwiseAbs().maxCoeff(&row);
    Eigen::MatrixXd a = w;
    a.row(row).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(row) = 1.0;
    Populations out;
    out.beta = beta;
    out.p = a.fullPivLu().solve(rhs);
    const double residual = (w * out.p).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-10 * std::max(1.0, norm))) {
        throw NumericalError("steady_state: stationarity residual " + std::to_string(residual));
    }
    // round-off may leave tiny negative entries for nearly empty levels
    for (Eigen::Index j = 0; j < n; ++j) {
        if (out.p(j) < 0.0) {
            if (out.p(j) < -1e-12) throw NumericalError("steady_state: negative population");
            out.p(j) = 0.0;
        }
    }
    out.p /= out.p.sum();
    return out;
}

std::vector<Populations> evolve(const Eigen::MatrixXd& w, const Populations& p0, double t_final, double dt) {
    if (!(dt > 0.0) || !(t_final >= 0.0)) throw ConfigError("evolve: need dt > 0 and t_final >= 0");
    const auto steps = static_cast<long>(std::ceil(t_final / dt - 1e-12));
    std::vector<Populations> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    traj.push_back(p0);
    Eigen::VectorXd p = p0.p;
    for (long s = 0; s < steps; ++s) {
        const Eigen::VectorXd k1 = w * p;
        const Eigen::VectorXd k2 = w * (p + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = w * (p + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = w * (p + dt * k3);
        p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!p.allFinite() || std::abs(p.sum() - p0.p.sum()) > 1e-10) {
            throw NumericalError("evolve: normalization drift, reduce dt");
        }
        traj.push_back({p0.beta, p});
    }
    return traj;
}

Populations boltzmann(const SystemSpec& spec, double beta) {
    if (!(beta >= 0.0)) throw ConfigError("boltzmann: beta must be >= 0");
    const auto n = static_cast<Eigen::Index>(spec.num_levels());
    Eigen::VectorXd e(n);
    for (Eigen::Index j = 0; j < n; ++j) e(j) = quasi_energy(spec, {static_cast<int>(j), 0});
    Populations out;
    out.beta = beta;
    out.p = Eigen::VectorXd::Zero(n);
    if (std::isinf(beta)) {
        Eigen::Index g = 0;
        e.minCoeff(&g);
        out.p(g) = 1.0;
        return out;
    }
    const double e_min = e.minCoeff();
    out.p = (-beta * (e.array() - e_min)).exp();
    out.p /= out.p.sum();
    return out;
}

double high_t_slope(const RateEngine& engine, int j, int j_prime, const std::vector<double>& beta_grid) {
    if (beta_grid.size() < 3) throw ConfigError("high_t_slope: need at least three beta values");
    // ln(p_j'/p_j) = s beta + O(beta^2): the expansion has no constant term (uniform state
    // at beta = 0), so the line is fitted through the origin
    double sxy = 0.0;
    double sxx = 0.0;
    for (double b : beta_grid) {
        const Populations ness = steady_state(build_generator(engine.table(b)), b);
        sxy += b * std::log(ness.p(j_prime) / ness.p(j));
        sxx += b * b;
    }
    return sxy / sxx;
}

std::vector<double> default_slope_grid(const SystemSpec& spec) {
    std::vector<double> e;
    for (std::size_t j = 0; j < spec.num_levels(); ++j) e.push_back(quasi_energy(spec, {static_cast<int>(j), 0}));
    std::sort(e.begin(), e.end());
    const double gap = e[1] - e[0];
    return {0.02 / gap, 0.04 / gap, 0.06 / gap, 0.08 / gap};
}

double thermal_domain_bound(const SystemSpec& spec, double curvature, int j, int j_prime) {
    if (j == j_prime) throw ConfigError("thermal_domain_bound: needs j != j'");
    const double gap = quasi_energy(spec, {j_prime, 0}) - quasi_energy(spec, {j, 0});
    return 2.0 * gap / (curvature + gap * gap);
}

double thermal_domain_bound(const RateEngine& engine, int j, int j_prime, double beta_fd) {
    return thermal_domain_bound(engine.spec(), moment_curvature_at_zero(engine, j, j_prime, beta_fd), j, j_prime);
}

} // namespace fness
