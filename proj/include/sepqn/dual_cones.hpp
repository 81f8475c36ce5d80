#pragma once

#include "sepqn/problem.hpp"

namespace sepqn {

/// Dual variable of one regularizer term, restricted to the slice of the
/// dual cone at tau = 1: ||z||_* <= weight, where ||.||_* is the dual norm
/// of the term's norm.
struct DualBlock {
    Vector z;
    double weight = 1.0;
    NormKind norm = NormKind::L1;

    static DualBlock zeros(const RegularizerTerm& term);
};

/// Euclidean projection onto {z : ||z||_* <= radius}.
Vector project_dual_ball(NormKind norm, double radius, const Vector& v);

/// Euclidean projection onto the l1 ball of the given radius
/// (sort-and-threshold, O(q log q)).
Vector project_l1_ball(const Vector& v, double radius);

/// argmin over feasible z' of (1/(2 step)) ||z' - z||^2 + z'^T gradient,
/// i.e. the projection of z - step * gradient onto the dual ball.
DualBlock dual_step(const DualBlock& block, const Vector& gradient, double step);

bool dual_feasible(const DualBlock& block, double tolerance);

/// Fenchel gap of one term at u = W x + b: weight * ||u|| - z^T u.
/// Nonnegative for every feasible z.
double fenchel_gap(NormKind norm, double weight, const Vector& z, const Vector& u);

/// psi_i(W_i x + b_i) - z^T (W_i x + b_i); throws if z is infeasible.
double dual_to_psi_certificate(const RegularizerTerm& term, const Vector& z, const Vector& x);

/// Proximal map of step * weight * ||.|| (used by the baselines).
Vector prox_norm(NormKind norm, double threshold, const Vector& v);

}  // namespace sepqn
