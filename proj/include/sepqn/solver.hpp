#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sepqn/flops.hpp"
#include "sepqn/problem.hpp"
#include "sepqn/scd.hpp"

namespace sepqn {

enum class InnerTolerancePolicy {
    /// Every surrogate solved to `inner_tolerance`.
    Fixed,
    /// Tolerance tied to the previous directional decrease |gamma|^1.5,
    /// capped above by `inner_tolerance`.
    Forcing,
};

class LbfgsMetric;

/// One accepted outer step, seen before the metric is updated.
struct OuterStep {
    std::size_t iter;
    const Vector& x;
    const Vector& gradient;
    const Vector& direction;
    const LbfgsMetric& metric;
    double gamma;
    double step;
    double inner_tolerance;
    double inner_gap;
};

struct SolverConfig {
    /// Sufficient-decrease constant, strictly inside (0, 1/2).
    double alpha = 1e-4;
    double backtrack_factor = 0.5;
    /// Relative objective change that counts as stalled.
    double outer_tolerance = 1e-8;
    /// Consecutive stalled iterations before stopping.
    std::size_t stall_iterations = 3;
    std::size_t max_outer = 500;
    std::size_t memory = 10;
    /// <= 0 selects max(1e-10, 0.1 * outer_tolerance).
    double inner_tolerance = 0.0;
    InnerTolerancePolicy inner_policy = InnerTolerancePolicy::Fixed;
    std::size_t max_inner = 1000;
    std::size_t restarts = 4;
    /// Run exactly max_inner iterations per inner round (cost benchmarks).
    bool fixed_inner_iterations = false;
    /// <= 0 selects the loss Lipschitz bound.
    double initial_sigma = 0.0;
    bool warm_start = true;
    bool adaptive_h0 = true;
    bool record_time = true;
    /// Called once per accepted step (tests and diagnostics).
    std::function<void(const OuterStep&)> observer;

    void validate() const;
    double effective_inner_tolerance() const;
};

struct IterationRecord {
    std::size_t iter = 0;
    double objective = 0.0;
    double step = 0.0;
    double gamma = 0.0;
    std::size_t inner_iters = 0;
    /// Cumulative data passes.
    std::size_t epochs = 0;
    /// Cumulative wall-clock seconds (0 when timing is off).
    double seconds = 0.0;
    double sigma = 0.0;
    double beta = 0.0;
    /// Flops spent in this iteration.
    std::uint64_t flops = 0;
    bool inner_converged = true;
    double inner_gap = 0.0;
    double dual_shift = 0.0;
    bool pair_accepted = false;
};

struct SolveTrace {
    std::vector<IterationRecord> records;
    double initial_objective = 0.0;
    std::string status = "running";
    std::size_t total_epochs = 0;
    std::size_t total_inner = 0;
    double seconds = 0.0;
    flops::Counts flops;
    std::size_t sigma_floor_hits = 0;
    std::size_t inner_failures = 0;
};

struct Solution {
    Vector x;
    double objective = 0.0;
    SolveTrace trace;
    DualBlocks duals;
};

/// gamma_k = grad^T delta + Psi(x + delta) - Psi(x).
double gamma(const CompositeProblem& problem, const Vector& x, const Vector& delta, const Vector& grad);

struct LineSearchResult {
    double step = 1.0;
    double value = 0.0;
    std::size_t probes = 0;
};

/// Largest t in {1, c, c^2, ...} with f(x + t delta) <= f(x) + alpha t gamma.
/// Each probe is one data pass.
LineSearchResult line_search(const CompositeProblem& problem, const Vector& x, const Vector& delta,
                             double gamma_k, double f_x, const SolverConfig& config,
                             PassCounter* counter = nullptr);

/// Proximal quasi-Newton solve with an LBFGS metric and SCD surrogate solves.
Solution solve(const CompositeProblem& problem, const SolverConfig& config, const Vector& x0 = Vector());

/// True iff every iteration in the last quarter of the trace took t = 1.
bool unit_step_tail(const SolveTrace& trace);

}  // namespace sepqn
