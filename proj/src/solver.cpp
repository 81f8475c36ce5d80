#include "sepqn/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "sepqn/error.hpp"
#include "sepqn/lbfgs.hpp"

namespace sepqn {

void SolverConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must lie strictly inside (0, 1/2)");
    }
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "backtrack_factor must lie in (0, 1)");
    }
    if (!(outer_tolerance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "outer_tolerance < 0");
    if (memory < 1) throw Error(ErrorCode::InvalidArgument, "lbfgs memory must be >= 1");
    if (restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be >= 1");
    if (max_inner < 1) throw Error(ErrorCode::InvalidArgument, "max_inner must be >= 1");
    if (stall_iterations < 1) throw Error(ErrorCode::InvalidArgument, "stall_iterations must be >= 1");
}

double SolverConfig::effective_inner_tolerance() const {
    return inner_tolerance > 0.0 ? inner_tolerance : std::max(1e-10, 0.1 * outer_tolerance);
}

double gamma(const CompositeProblem& problem, const Vector& x, const Vector& delta, const Vector& grad) {
    if (delta.size() != x.size()) throw_dimension("gamma delta", x.size(), delta.size());
    if (grad.size() != x.size()) throw_dimension("gamma gradient", x.size(), grad.size());
    return grad.dot(delta) + psi_total(problem, x + delta) - psi_total(problem, x);
}

LineSearchResult line_search(const CompositeProblem& problem, const Vector& x, const Vector& delta,
                             double gamma_k, double f_x, const SolverConfig& config, PassCounter* counter) {
    if (gamma_k > 0.0) {
        throw Error(ErrorCode::InvalidArgument,
                    "line_search: gamma = " + std::to_string(gamma_k) + " > 0, not a descent direction");
    }
    LineSearchResult result;
    double t = 1.0;
    while (t >= 1e-12) {
        const Vector trial = x + t * delta;
        const double f_trial = objective(problem, trial, counter);
        ++result.probes;
        if (!std::isfinite(f_trial) && f_trial < 0.0) {
            throw Error(ErrorCode::NonFinite, "line_search: objective is -inf");
        }
        if (f_trial <= f_x + config.alpha * t * gamma_k) {
            result.step = t;
            result.value = f_trial;
            return result;
        }
        t *= config.backtrack_factor;
    }
    throw Error(ErrorCode::LineSearchFailure,
                "line search failed: step fell below 1e-12 (gamma = " + std::to_string(gamma_k) +
                    ", |delta| = " + std::to_string(delta.norm()) + ", f = " + std::to_string(f_x) + ")");
}

namespace {

double stacked_distance(const DualBlocks& a, const DualBlocks& b) {
    if (a.size() != b.size()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i].z - b[i].z).squaredNorm();
    return std::sqrt(acc);
}

}  // namespace

Solution solve(const CompositeProblem& problem, const SolverConfig& config, const Vector& x0_in) {
    config.validate();
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    const auto flops_start = flops::snapshot();
    auto elapsed = [&] {
        return config.record_time ? std::chrono::duration<double>(clock::now() - t_start).count() : 0.0;
    };

    const Index p = problem.dimension();
    Vector x = x0_in.size() == 0 ? Vector::Zero(p) : x0_in;
    if (x.size() != p) throw_dimension("solve x0", p, x.size());

    PassCounter passes;
    ValueGrad vg = problem.loss().value_grad(x, &passes);
    double f = vg.value + psi_total(problem, x);
    if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "solve: objective at x0 is not finite");

    const double sigma0 = config.initial_sigma > 0.0 ? config.initial_sigma : problem.loss().lipschitz_bound();
    LbfgsMetric metric(p, config.memory, sigma0);

    Solution sol;
    sol.trace.initial_objective = f;
    DualBlocks duals = zero_duals(problem.terms());
    const double eps_s = config.effective_inner_tolerance();
    double last_gamma = -1.0;
    std::size_t stalled = 0;

    for (std::size_t k = 1; k <= config.max_outer; ++k) {
        const auto iter_flops = flops::snapshot();
        InnerOptions inner;
        inner.max_inner = config.max_inner;
        inner.restarts = config.restarts;
        inner.fixed_iterations = config.fixed_inner_iterations;
        inner.tolerance = eps_s;
        if (config.inner_policy == InnerTolerancePolicy::Forcing && last_gamma < 0.0 && k > 1) {
            inner.tolerance = std::clamp(1e-2 * std::pow(-last_gamma, 1.5), 1e-18, eps_s);
        }

        const Surrogate model{metric, x, vg.gradient, vg.value, problem.terms()};
        const DualBlocks warm = config.warm_start ? duals : zero_duals(problem.terms());
        InnerResult res = continuation_solve(model, warm, inner);
        std::size_t inner_iters = res.inner_iterations;
        double gam = gamma(problem, x, res.direction, vg.gradient);

        const double fscale = std::max(1.0, std::abs(f));
        IterationRecord rec;
        rec.iter = k;

        // Stationary: the surrogate predicts no further decrease.
        if (res.direction.squaredNorm() == 0.0 || (gam <= 0.0 && -gam <= 1e-15 * fscale)) {
            sol.trace.status = "converged";
            duals = std::move(res.duals);
            break;
        }

        LineSearchResult ls;
        bool searched = false;
        for (int attempt = 0; attempt < 2 && !searched; ++attempt) {
            try {
                if (gam > 0.0) {
                    throw Error(ErrorCode::LineSearchFailure, "surrogate direction is not a descent direction");
                }
                ls = line_search(problem, x, res.direction, gam, f, config, &passes);
                searched = true;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::LineSearchFailure) throw;
                if (std::abs(gam) <= 1e-9 * fscale) break;  // at the rounding floor
                if (attempt == 1) throw;
                ++sol.trace.inner_failures;
                InnerOptions tight = inner;
                tight.tolerance = inner.tolerance * 0.01;
                res = continuation_solve(model, res.duals, tight);
                inner_iters += res.inner_iterations;
                gam = gamma(problem, x, res.direction, vg.gradient);
            }
        }
        if (!searched) {
            sol.trace.status = "converged";
            break;
        }

        if (config.observer) {
            config.observer(OuterStep{k, x, vg.gradient, res.direction, metric, gam, ls.step,
                                      inner.tolerance, res.gap_estimate});
        }
        Vector x_new = x + ls.step * res.direction;
        ValueGrad vg_new = problem.loss().value_grad(x_new, &passes);
        const Vector s = x_new - x;
        const Vector y = vg_new.gradient - vg.gradient;
        const bool accepted = metric.push_pair(s, y);
        if (accepted && config.adaptive_h0) metric.adapt_h0(ls.step, s, y);

        rec.dual_shift = stacked_distance(res.duals, duals);
        rec.objective = ls.value;
        rec.step = ls.step;
        rec.gamma = gam;
        rec.inner_iters = inner_iters;
        rec.inner_converged = res.converged;
        rec.inner_gap = res.gap_estimate;
        rec.sigma = metric.sigma();
        rec.beta = metric.beta();
        rec.pair_accepted = accepted;
        rec.epochs = passes.passes;
        rec.seconds = elapsed();
        rec.flops = (flops::snapshot() - iter_flops).total();
        sol.trace.records.push_back(rec);
        sol.trace.total_inner += inner_iters;
        if (!res.converged) ++sol.trace.inner_failures;

        const double change = f - ls.value;
        x = std::move(x_new);
        vg = std::move(vg_new);
        f = ls.value;
        duals = std::move(res.duals);
        last_gamma = gam;
        if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "solve: objective became non-finite");

        stalled = change <= config.outer_tolerance * fscale ? stalled + 1 : 0;
        if (stalled >= config.stall_iterations) {
            sol.trace.status = "converged";
            break;
        }
    }
    if (sol.trace.status == "running") sol.trace.status = "max_iterations";

    sol.x = std::move(x);
    sol.objective = f;
    sol.duals = std::move(duals);
    sol.trace.total_epochs = passes.passes;
    sol.trace.seconds = elapsed();
    sol.trace.flops = flops::snapshot() - flops_start;
    sol.trace.sigma_floor_hits = metric.floor_hits();
    return sol;
}

bool unit_step_tail(const SolveTrace& trace) {
    const auto& r = trace.records;
    if (r.empty()) return true;
    const std::size_t tail = std::max<std::size_t>(1, r.size() / 4);
    return std::all_of(r.end() - static_cast<std::ptrdiff_t>(tail), r.end(),
                       [](const IterationRecord& rec) { return rec.step == 1.0; });
}

}  // namespace sepqn
