// quadrature.hpp — Gauss-Legendre rules and the threshold-aware momentum grid.

#pragma once

#include <cstddef>
#include <vector>

namespace fness {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n, ascending nodes).
QuadratureRule gauss_legendre(int n);

// One quadrature node of the incoming-momentum integral.
//
// The interval between two consecutive thresholds [a, b] is integrated in the
// variable u = sqrt(p^2 - a^2), which is the outgoing momentum of the channel that
// opens at a. `weight_dp` is the weight for an integrand in dp, `weight_du` the
// weight for an integrand in du; they differ by the Jacobian u/p.
struct MomentumNode {
    double p{0.0};
    double u{0.0};
    double weight_dp{0.0};
    double weight_du{0.0};
    int anchor{-1}; // index (into the caller's threshold list) of the channel opening at a, or -1
};

struct Threshold {
    double momentum{0.0}; // incoming momentum at which the channel opens
    int channel{-1};      // caller-defined channel index
};

// Builds the node set on [0, p_cut]. Panels are split at every threshold below
// p_cut; each panel is graded geometrically in u starting from `first_piece`, and
// the last piece of a panel clusters its nodes quadratically toward the right end
// so the square-root cusp of the next threshold is integrated exactly in the limit.
std::vector<MomentumNode> momentum_grid(std::vector<Threshold> thresholds, double p_cut,
                                        int points_per_piece, double first_piece);

} // namespace fness
