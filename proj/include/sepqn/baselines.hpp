#pragma once

#include <cstddef>

#include "sepqn/solver.hpp"

namespace sepqn {

enum class BaselineKind { Fista, Admm, ScdDirect };

struct BaselineConfig {
    BaselineKind kind = BaselineKind::Fista;
    std::size_t max_iterations = 5000;
    /// FISTA / scd-direct: relative objective change treated as stalled.
    /// ADMM: absolute and relative residual tolerance.
    double tolerance = 1e-12;
    std::size_t stall_iterations = 5;
    /// ADMM penalty and residual balancing.
    double rho = 1.0;
    bool adapt_rho = true;
    /// scd-direct prox accuracy.
    double inner_tolerance = 1e-12;
    std::size_t max_inner = 2000;
    std::size_t restarts = 4;
    bool record_time = true;
    /// ADMM dense factorization guard.
    Index max_dense_dim = 5000;
};

/// Accelerated proximal gradient with backtracking on the Lipschitz constant
/// and a monotone restart. Requires a single L1 or L2 term with W = I.
Solution fista_solve(const CompositeProblem& problem, const BaselineConfig& config, const Vector& x0 = Vector());

/// Consensus ADMM with u_i = W_i x + b_i. The x-update is exact for least
/// squares and uses the quadratic majorizer ||A||^2/(4n) for logistic loss;
/// one cached Cholesky factor per penalty value.
Solution admm_solve(const CompositeProblem& problem, const BaselineConfig& config, const Vector& x0 = Vector());

/// Accelerated proximal gradient on the full problem whose multi-term prox is
/// solved by the SCD inner solver with metric L * I.
Solution scd_direct_solve(const CompositeProblem& problem, const BaselineConfig& config,
                          const Vector& x0 = Vector());

/// Diagnostics from the most recent ADMM iteration, for tests.
struct AdmmResiduals {
    double primal = 0.0;
    double dual = 0.0;
    double primal_tolerance = 0.0;
    double dual_tolerance = 0.0;
    double rho = 0.0;
};

Solution admm_solve(const CompositeProblem& problem, const BaselineConfig& config, const Vector& x0,
                    AdmmResiduals* residuals);

}  // namespace sepqn
