#include "fness/quadrature.hpp"

#include "fness/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fness {

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw ConfigError("gauss_legendre: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute the derivative at the converged root for the weight
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        rule.nodes[lo] = -z;
        rule.nodes[hi] = z;
        rule.weights[lo] = w;
        rule.weights[hi] = w;
    }
    return rule;
}

std::vector<MomentumNode> momentum_grid(std::vector<Threshold> thresholds, double p_cut,
                                        int points_per_piece, double first_piece) {
    if (!(p_cut > 0.0)) throw ConfigError("momentum_grid: p_cut must be > 0");
    if (!(first_piece > 0.0)) throw ConfigError("momentum_grid: first piece must be > 0");

    std::erase_if(thresholds, [p_cut](const Threshold& t) { return t.momentum < 0.0 || t.momentum >= p_cut; });
    std::sort(thresholds.begin(), thresholds.end(),
              [](const Threshold& x, const Threshold& y) { return x.momentum < y.momentum; });
    if (thresholds.empty() || thresholds.front().momentum > 0.0) {
        thresholds.insert(thresholds.begin(), Threshold{0.0, -1});
    }

    const QuadratureRule gl = gauss_legendre(points_per_piece);
    std::vector<MomentumNode> grid;

    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        const double a = thresholds[k].momentum;
        const double b = (k + 1 < thresholds.size()) ? thresholds[k + 1].momentum : p_cut;
        if (!(b > a)) continue;
        const int anchor = thresholds[k].channel;
        const double U = std::sqrt((b - a) * (b + a));

        // geometric grading in u: [0, h], [h, 2h], [2h, 4h], ...
        std::vector<double> cuts{0.0};
        double next = first_piece;
        while (next < U * (1.0 - 1e-12) && U - next > 0.25 * first_piece) {
            cuts.push_back(next);
            next = (cuts.size() == 2) ? 2.0 * first_piece : 2.0 * next;
        }
        cuts.push_back(U);

        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double u0 = cuts[s];
            const double u1 = cuts[s + 1];
            const bool last = (s + 2 == cuts.size());
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                const double t = 0.5 * (gl.nodes[i] + 1.0);
                const double wt = 0.5 * gl.weights[i];
                double u = 0.0;
                double du_dt = 0.0;
                if (last) {
                    // u = U - (U - u0)(1 - t)^2 clusters toward the right end
                    const double span = u1 - u0;
                    u = u1 - span * (1.0 - t) * (1.0 - t);
                    du_dt = 2.0 * span * (1.0 - t);
                } else {
                    u = u0 + (u1 - u0) * t;
                    du_dt = u1 - u0;
                }
                MomentumNode node;
                node.u = u;
                node.p = std::sqrt(a * a + u * u);
                node.weight_du = wt * du_dt;
                node.weight_dp = node.weight_du * (node.p > 0.0 ? u / node.p : 1.0);
                node.anchor = anchor;
                grid.push_back(node);
            }
        }
    }
    return grid;
}

} // namespace fness
