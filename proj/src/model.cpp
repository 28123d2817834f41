#include "fness/model.hpp"

#include "fness/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fness {

namespace {

void require_level(const SystemSpec& spec, int j, const char* what) {
    if (j < 0 || static_cast<std::size_t>(j) >= spec.num_levels()) {
        throw ConfigError(std::string(what) + ": level index " + std::to_string(j) +
                          " out of range [0, " + std::to_string(spec.num_levels()) + ")");
    }
}

} // namespace

SystemSpec toy_model(double lambda_drive) {
    using std::numbers::pi;
    SystemSpec s;
    s.levels = {-0.5, 0.0, 0.4};
    s.omega = 1.35;
    s.lambda_drive = lambda_drive;
    s.coupling_strengths = {1.0, 0.7, 1.5};
    s.drive_profile = {-1, 0, +1};

    const double r = 1.0 / std::sqrt(3.0);
    const auto ph = [r](double angle) { return std::polar(r, angle); };
    s.overlaps.resize(3, 3);
    // columns: levels 1, 2, 3
    s.overlaps << ph(0.0), ph(0.0), ph(0.0),
                  ph(+4.0 * pi / 3.0), ph(0.0), ph(+2.0 * pi / 3.0),
                  ph(-4.0 * pi / 3.0), ph(0.0), ph(-2.0 * pi / 3.0);
    return s;
}

void validate(const SystemSpec& spec) {
    const auto n = spec.num_levels();
    if (n < 2) throw ConfigError("system: at least two levels required");
    for (double e : spec.levels) {
        if (!std::isfinite(e)) throw ConfigError("system: level energies must be finite");
    }
    if (!(spec.omega > 0.0) || !std::isfinite(spec.omega)) throw ConfigError("system: omega must be > 0");
    if (!(spec.lambda_drive >= 0.0) || !std::isfinite(spec.lambda_drive)) {
        throw ConfigError("system: lambda must be >= 0");
    }
    if (!(spec.hbar > 0.0)) throw ConfigError("system: hbar must be > 0");
    if (!(spec.mass > 0.0)) throw ConfigError("system: mass must be > 0");
    if (!(spec.density > 0.0)) throw ConfigError("system: density must be > 0");
    if (spec.drive_profile.size() != n) {
        throw ConfigError("system: drive profile needs one coefficient per level");
    }
    if (spec.num_scatterers() == 0) throw ConfigError("coupling: at least one scatterer required");
    for (double v : spec.coupling_strengths) {
        if (!std::isfinite(v)) throw ConfigError("coupling: strengths must be finite");
    }
    if (static_cast<std::size_t>(spec.overlaps.rows()) != spec.num_scatterers() ||
        static_cast<std::size_t>(spec.overlaps.cols()) != n) {
        throw ConfigError("coupling: overlap matrix must be (scatterers x levels)");
    }
    for (Eigen::Index i = 0; i < spec.overlaps.rows(); ++i) {
        const double norm = spec.overlaps.row(i).norm();
        if (std::abs(norm - 1.0) > 1e-10) {
            throw ConfigError("coupling: overlap row " + std::to_string(i) + " is not normalized");
        }
    }
}

void validate(const Truncation& trunc) {
    if (trunc.nu_cut < 0) throw ConfigError("truncation: nu_cut must be >= 0");
    if (!(trunc.e_cut > 0.0) || !std::isfinite(trunc.e_cut)) throw ConfigError("truncation: e_cut must be > 0");
    if (trunc.quad_points < 8) throw ConfigError("truncation: quad_points must be >= 8");
    if (!(trunc.degeneracy_tol > 0.0)) throw ConfigError("truncation: degeneracy_tol must be > 0");
}

void validate(const SystemSpec& spec, const Truncation& trunc) {
    validate(spec);
    validate(trunc);
    std::vector<double> qe;
    qe.reserve(spec.num_levels() * static_cast<std::size_t>(2 * trunc.nu_cut + 1));
    for (std::size_t j = 0; j < spec.num_levels(); ++j) {
        for (int nu = -trunc.nu_cut; nu <= trunc.nu_cut; ++nu) {
            qe.push_back(quasi_energy(spec, {static_cast<int>(j), nu}));
        }
    }
    std::sort(qe.begin(), qe.end());
    for (std::size_t k = 1; k < qe.size(); ++k) {
        if (qe[k] - qe[k - 1] <= trunc.degeneracy_tol) {
            throw ConfigError("system: degenerate quasi-energies near " + std::to_string(qe[k]));
        }
    }
}

double quasi_energy(const SystemSpec& spec, Channel ch) {
    require_level(spec, ch.level, "quasi_energy");
    return spec.levels[static_cast<std::size_t>(ch.level)] + ch.nu * spec.hbar * spec.omega;
}

cdouble coupling_base(const SystemSpec& spec, int level_a, int level_b) {
    require_level(spec, level_a, "coupling_base");
    require_level(spec, level_b, "coupling_base");
    cdouble sum{0.0, 0.0};
    for (std::size_t i = 0; i < spec.num_scatterers(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        sum += std::conj(spec.overlaps(row, level_a)) * spec.coupling_strengths[i] *
               spec.overlaps(row, level_b);
    }
    return sum;
}

int phase_quadrature_nodes(int dnu, double k) noexcept {
    return 2 * (4 * std::abs(dnu) + 16 + static_cast<int>(std::ceil(2.0 * std::abs(k))));
}

cdouble phase_average_factor(const SystemSpec& spec, int dc, int dnu, int nodes) {
    if (dc == 0) return dnu == 0 ? cdouble{1.0, 0.0} : cdouble{0.0, 0.0};
    const double k = dc * spec.lambda_drive / (spec.hbar * spec.omega);
    if (k == 0.0) return dnu == 0 ? cdouble{1.0, 0.0} : cdouble{0.0, 0.0};
    // Periodic analytic integrand in theta = omega t: the trapezoid rule converges spectrally.
    cdouble sum{0.0, 0.0};
    const double step = 2.0 * std::numbers::pi / nodes;
    for (int m = 0; m < nodes; ++m) {
        const double theta = m * step;
        sum += std::polar(1.0, k * std::sin(theta) - dnu * theta);
    }
    return sum / static_cast<double>(nodes);
}

cdouble floquet_coupling(const SystemSpec& spec, Channel out, Channel in) {
    const int dc = spec.drive_profile.at(static_cast<std::size_t>(out.level)) -
                   spec.drive_profile.at(static_cast<std::size_t>(in.level));
    const int dnu = out.nu - in.nu;
    const double k = dc * spec.lambda_drive / (spec.hbar * spec.omega);
    return phase_average_factor(spec, dc, dnu, phase_quadrature_nodes(dnu, k)) *
           coupling_base(spec, out.level, in.level);
}

} // namespace fness
