#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sepqn/dual_cones.hpp"
#include "sepqn/lbfgs.hpp"
#include "sepqn/problem.hpp"

namespace sepqn {

/// The local model g(x_k) + grad^T (x - x_k) + 1/2 (x - x_k)^T H (x - x_k)
/// plus the regularizer terms, as seen by the dual solver.
struct Surrogate {
    const LbfgsMetric& metric;
    const Vector& x;
    const Vector& gradient;
    double g_value;
    std::span<const RegularizerTerm> terms;
};

using DualBlocks = std::vector<DualBlock>;

DualBlocks zero_duals(std::span<const RegularizerTerm> terms);

/// Lagrangian minimizer x(z) = x_k - H^{-1} (grad - sum_i W_i^T z_i).
Vector recover_primal(const Surrogate& model, const DualBlocks& duals);

/// D^-(z) = -[ghat(x(z)) - sum_i z_i^T (W_i x(z) + b_i)].
double dual_objective(const Surrogate& model, const DualBlocks& duals);

/// grad D^-(z): the stacked blocks W_i x(z) + b_i.
std::vector<Vector> dual_gradient(const Surrogate& model, const DualBlocks& duals);

/// Duality gap of the surrogate at z: sum of per-term Fenchel gaps at x(z).
double surrogate_gap(const Surrogate& model, const DualBlocks& duals);

/// Surrogate value ghat(x) + Psi(x).
double surrogate_value(const Surrogate& model, const Vector& x);

/// Accelerated-method state. theta follows theta <- 2 / (1 + sqrt(1 + 4/theta^2)).
struct DualState {
    DualBlocks blocks;
    std::vector<Vector> aux_v;
    double theta = 1.0;
    double step_delta = 1.0;
    std::size_t inner_iter = 0;
};

double next_theta(double theta);

struct InnerOptions {
    /// Stop when the surrogate duality gap drops to this value.
    double tolerance = 1e-10;
    /// Iteration cap per round.
    std::size_t max_inner = 1000;
    /// Continuation rounds (1 = plain accelerated solve).
    std::size_t restarts = 1;
    /// Starting dual step; <= 0 selects initial_step_delta().
    double initial_delta = 0.0;
    double growth = 1.1;
    /// Run exactly max_inner iterations per round, ignoring the tolerance.
    bool fixed_iterations = false;
};

struct InnerResult {
    Vector direction;
    DualBlocks duals;
    std::size_t inner_iterations = 0;
    std::size_t backtracks = 0;
    std::size_t rounds = 0;
    double gap_estimate = 0.0;
    double initial_gap = 0.0;
    /// Norm of H (x - x_k) + grad - sum_i W_i^T z_i at the returned point.
    double residual = 0.0;
    double final_delta = 0.0;
    bool converged = false;
};

/// delta_0 = 1 / L with L = (sum_i ||W_i||)^2 ||H^{-1}||.
double initial_step_delta(const LbfgsMetric& metric, std::span<const RegularizerTerm> terms);

InnerResult solve_surrogate(const Surrogate& model, const DualBlocks& warm, const InnerOptions& options);

/// Repeated accelerated solves re-centred at the previous round's duals,
/// with the round tolerance shrinking by 10x per round down to
/// options.tolerance (the last round always uses options.tolerance).
InnerResult continuation_solve(const Surrogate& model, const DualBlocks& warm,
                               const InnerOptions& options);

}  // namespace sepqn
