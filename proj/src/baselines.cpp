#include "sepqn/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include <Eigen/Cholesky>

#include "sepqn/error.hpp"

namespace sepqn {

namespace {

using clock_type = std::chrono::steady_clock;

struct Timer {
    bool enabled;
    clock_type::time_point start = clock_type::now();
    double seconds() const {
        return enabled ? std::chrono::duration<double>(clock_type::now() - start).count() : 0.0;
    }
};

/// x+ = argmin grad^T (x - y) + L/2 ||x - y||^2 + Psi(x), warm-started from duals.
using ProxStep = std::function<Vector(const Vector& y, const ValueGrad& at_y, double lipschitz,
                                      std::size_t& inner_iters)>;

Solution accelerated_prox_gradient(const CompositeProblem& problem, const BaselineConfig& config,
                                   const Vector& x0_in, const ProxStep& prox) {
    const Timer timer{config.record_time};
    const auto flops_start = flops::snapshot();
    const Index p = problem.dimension();
    Vector x = x0_in.size() == 0 ? Vector::Zero(p) : x0_in;
    if (x.size() != p) throw_dimension("baseline x0", p, x.size());

    PassCounter passes;
    const SmoothLoss& loss = problem.loss();
    double f = objective(problem, x, &passes);
    double lipschitz = loss.lipschitz_bound();
    Vector y = x;
    double t = 1.0;
    std::size_t stalled = 0;

    Solution sol;
    sol.trace.initial_objective = f;
    for (std::size_t k = 1; k <= config.max_iterations; ++k) {
        const auto iter_flops = flops::snapshot();
        const ValueGrad at_y = loss.value_grad(y, &passes);
        std::size_t inner = 0;
        Vector x_next;
        double g_next = 0.0;
        while (true) {
            x_next = prox(y, at_y, lipschitz, inner);
            g_next = loss.value(x_next, &passes);
            const Vector d = x_next - y;
            const double model = at_y.value + at_y.gradient.dot(d) + 0.5 * lipschitz * d.squaredNorm();
            if (g_next <= model + 1e-12 * std::max(1.0, std::abs(model))) break;
            lipschitz *= 2.0;
        }
        const double f_next = g_next + psi_total(problem, x_next);
        IterationRecord rec;
        rec.iter = k;
        rec.sigma = lipschitz;
        rec.inner_iters = inner;
        sol.trace.total_inner += inner;
        if (f_next > f) {
            // Monotone restart: drop momentum and retry from x.
            t = 1.0;
            y = x;
            rec.objective = f;
            rec.step = 0.0;
            ++stalled;  // repeated restarts mean the prox step itself cannot descend
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = x_next + ((t - 1.0) / t_next) * (x_next - x);
            t = t_next;
            const double change = f - f_next;
            x = std::move(x_next);
            f = f_next;
            rec.objective = f;
            rec.step = 1.0;
            stalled = change <= config.tolerance * std::max(1.0, std::abs(f)) ? stalled + 1 : 0;
        }
        rec.epochs = passes.passes;
        rec.seconds = timer.seconds();
        rec.flops = (flops::snapshot() - iter_flops).total();
        sol.trace.records.push_back(rec);
        if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "baseline: objective became non-finite");
        if (stalled >= config.stall_iterations) {
            sol.trace.status = "converged";
            break;
        }
    }
    if (sol.trace.status == "running") sol.trace.status = "max_iterations";
    sol.x = std::move(x);
    sol.objective = f;
    sol.trace.total_epochs = passes.passes;
    sol.trace.seconds = timer.seconds();
    sol.trace.flops = flops::snapshot() - flops_start;
    return sol;
}

// Proximal map of threshold * norm(. + b) evaluated at v.
Vector shifted_prox(const RegularizerTerm& term, double threshold, const Vector& v) {
    return prox_norm(term.norm, threshold, v + term.offset) - term.offset;
}

}  // namespace

Solution fista_solve(const CompositeProblem& problem, const BaselineConfig& config, const Vector& x0) {
    if (problem.term_count() != 1) {
        throw Error(ErrorCode::Unsupported, "fista: requires exactly one regularizer term");
    }
    const auto& term = problem.terms().front();
    if (term.op.kind() != OperatorKind::Identity) {
        throw Error(ErrorCode::Unsupported, "fista: regularizer operator must be the identity");
    }
    if (term.norm == NormKind::LInf) throw Error(ErrorCode::Unsupported, "fista: l-infinity term not supported");
    return accelerated_prox_gradient(problem, config, x0,
                                     [&term](const Vector& y, const ValueGrad& at_y, double lipschitz,
                                             std::size_t&) {
                                         return shifted_prox(term, term.weight / lipschitz,
                                                             y - at_y.gradient / lipschitz);
                                     });
}

Solution scd_direct_solve(const CompositeProblem& problem, const BaselineConfig& config, const Vector& x0) {
    LbfgsMetric metric(problem.dimension(), 1, 1.0);
    DualBlocks duals = zero_duals(problem.terms());
    InnerOptions inner;
    inner.tolerance = config.inner_tolerance;
    inner.max_inner = config.max_inner;
    inner.restarts = config.restarts;
    return accelerated_prox_gradient(
        problem, config, x0,
        [&](const Vector& y, const ValueGrad& at_y, double lipschitz, std::size_t& inner_iters) {
            if (metric.sigma() != lipschitz) metric.set_sigma(lipschitz);
            const Surrogate model{metric, y, at_y.gradient, at_y.value, problem.terms()};
            InnerResult res = continuation_solve(model, duals, inner);
            inner_iters += res.inner_iterations;
            duals = std::move(res.duals);
            return Vector(y + res.direction);
        });
}

Solution admm_solve(const CompositeProblem& problem, const BaselineConfig& config, const Vector& x0) {
    return admm_solve(problem, config, x0, nullptr);
}

Solution admm_solve(const CompositeProblem& problem, const BaselineConfig& config, const Vector& x0_in,
                    AdmmResiduals* residuals) {
    const Index p = problem.dimension();
    if (p > config.max_dense_dim) {
        throw Error(ErrorCode::Unsupported, "admm: dimension " + std::to_string(p) +
                                                " exceeds the dense factorization guard " +
                                                std::to_string(config.max_dense_dim));
    }
    if (!(config.rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "admm: rho must be positive");
    const Timer timer{config.record_time};
    const auto flops_start = flops::snapshot();
    const auto& terms = problem.terms();
    const std::size_t n_terms = terms.size();
    const SmoothLoss& loss = problem.loss();
    const bool exact = loss.kind() == LossKind::LeastSquares;

    // Dense W^T W summed over terms.
    DenseMatrix wtw = DenseMatrix::Zero(p, p);
    for (Index j = 0; j < p; ++j) {
        const Vector e = Vector::Unit(p, j);
        for (const auto& t : terms) wtw.col(j) += t.op.apply_transpose(t.op.apply(e));
    }
    DenseMatrix base = DenseMatrix::Zero(p, p);
    Vector data_rhs = Vector::Zero(p);
    double curvature = 0.0;
    if (exact) {
        const DenseMatrix a = loss.data().to_dense();
        const double scale = 2.0 / static_cast<double>(loss.samples());
        base = scale * (a.transpose() * a);
        base.diagonal().array() += loss.ridge();
        Vector targets(loss.samples());
        for (Index i = 0; i < targets.size(); ++i) targets[i] = loss.labels()[static_cast<std::size_t>(i)];
        data_rhs = scale * (a.transpose() * targets);
    } else {
        curvature = loss.lipschitz_bound();
        base.diagonal().setConstant(curvature);
    }

    double rho = config.rho;
    Eigen::LLT<DenseMatrix> factor;
    auto refactor = [&] {
        factor.compute(base + rho * wtw);
        if (factor.info() != Eigen::Success) {
            throw Error(ErrorCode::NonFinite, "admm: x-update system is not positive definite");
        }
        flops::add(flops::Bucket::Other, static_cast<std::uint64_t>(p * p * p / 3));
    };
    refactor();

    Vector x = x0_in.size() == 0 ? Vector::Zero(p) : x0_in;
    if (x.size() != p) throw_dimension("admm x0", p, x.size());
    std::vector<Vector> u(n_terms);
    std::vector<Vector> w(n_terms);
    for (std::size_t i = 0; i < n_terms; ++i) {
        u[i] = terms[i].affine(x);
        w[i] = Vector::Zero(terms[i].output_dim());
    }
    Index total_q = problem.total_dual_dim();

    PassCounter passes;
    ValueGrad vg = loss.value_grad(x, &passes);
    double f = vg.value + psi_total(problem, x);
    Solution sol;
    sol.trace.initial_objective = f;
    AdmmResiduals last;

    for (std::size_t k = 1; k <= config.max_iterations; ++k) {
        const auto iter_flops = flops::snapshot();
        Vector rhs = exact ? data_rhs : Vector(curvature * x - vg.gradient);
        Vector coupling = Vector::Zero(p);
        for (std::size_t i = 0; i < n_terms; ++i) {
            terms[i].op.add_apply_transpose(u[i] - terms[i].offset - w[i], coupling);
        }
        rhs += rho * coupling;
        x = factor.solve(rhs);
        flops::add(flops::Bucket::Other, 2 * static_cast<std::uint64_t>(p * p));

        double r_sq = 0.0;
        double wx_sq = 0.0;
        double u_sq = 0.0;
        double b_sq = 0.0;
        Vector du_t = Vector::Zero(p);
        Vector w_t = Vector::Zero(p);
        for (std::size_t i = 0; i < n_terms; ++i) {
            const Vector wx = terms[i].op.apply(x);
            const Vector affine = wx + terms[i].offset;
            const Vector u_old = u[i];
            u[i] = prox_norm(terms[i].norm, terms[i].weight / rho, affine + w[i]);
            w[i] += affine - u[i];
            r_sq += (affine - u[i]).squaredNorm();
            wx_sq += wx.squaredNorm();
            u_sq += u[i].squaredNorm();
            b_sq += terms[i].offset.squaredNorm();
            terms[i].op.add_apply_transpose(u[i] - u_old, du_t);
            terms[i].op.add_apply_transpose(w[i], w_t);
        }
        last.primal = std::sqrt(r_sq);
        last.dual = rho * du_t.norm();
        last.primal_tolerance = std::sqrt(static_cast<double>(total_q)) * config.tolerance +
                                config.tolerance * std::sqrt(std::max({wx_sq, u_sq, b_sq}));
        last.dual_tolerance = std::sqrt(static_cast<double>(p)) * config.tolerance +
                              config.tolerance * rho * w_t.norm();
        last.rho = rho;

        vg = loss.value_grad(x, &passes);
        f = vg.value + psi_total(problem, x);
        if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "admm: objective became non-finite");

        IterationRecord rec;
        rec.iter = k;
        rec.objective = f;
        rec.step = 1.0;
        rec.sigma = rho;
        rec.epochs = passes.passes;
        rec.seconds = timer.seconds();
        rec.flops = (flops::snapshot() - iter_flops).total();
        rec.inner_gap = last.primal;
        rec.dual_shift = last.dual;
        sol.trace.records.push_back(rec);

        if (last.primal <= last.primal_tolerance && last.dual <= last.dual_tolerance) {
            sol.trace.status = "converged";
            break;
        }
        if (config.adapt_rho && k % 10 == 0) {
            double scale = 1.0;
            if (last.primal > 10.0 * last.dual) scale = 2.0;
            else if (last.dual > 10.0 * last.primal) scale = 0.5;
            if (scale != 1.0) {
                rho *= scale;
                for (auto& wi : w) wi /= scale;
                refactor();
            }
        }
    }
    if (sol.trace.status == "running") sol.trace.status = "max_iterations";
    if (residuals) *residuals = last;
    sol.x = std::move(x);
    sol.objective = f;
    sol.trace.total_epochs = passes.passes;
    sol.trace.seconds = timer.seconds();
    sol.trace.flops = flops::snapshot() - flops_start;
    return sol;
}

}  // namespace sepqn
