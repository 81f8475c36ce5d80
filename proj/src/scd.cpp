#include "sepqn/scd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sepqn/error.hpp"

namespace sepqn {

DualBlocks zero_duals(std::span<const RegularizerTerm> terms) {
    DualBlocks duals;
    duals.reserve(terms.size());
    for (const auto& t : terms) duals.push_back(DualBlock::zeros(t));
    return duals;
}

namespace {

void check_duals(const Surrogate& model, const DualBlocks& duals) {
    if (duals.size() != model.terms.size()) {
        throw_dimension("dual block count", static_cast<long>(model.terms.size()),
                        static_cast<long>(duals.size()));
    }
    for (std::size_t i = 0; i < duals.size(); ++i) {
        if (duals[i].z.size() != model.terms[i].output_dim()) {
            throw_dimension("dual block " + std::to_string(i), model.terms[i].output_dim(),
                            duals[i].z.size());
        }
    }
}

// grad - sum_i W_i^T z_i
Vector reduced_gradient(const Surrogate& model, const std::vector<Vector>& z) {
    Vector r = model.gradient;
    Vector wz = Vector::Zero(r.size());
    for (std::size_t i = 0; i < z.size(); ++i) model.terms[i].op.add_apply_transpose(z[i], wz);
    r -= wz;
    return r;
}

Vector primal_at(const Surrogate& model, const std::vector<Vector>& z) {
    return model.x - model.metric.inv_apply(reduced_gradient(model, z));
}

std::vector<Vector> affine_blocks(const Surrogate& model, const Vector& x) {
    std::vector<Vector> u;
    u.reserve(model.terms.size());
    for (const auto& t : model.terms) u.push_back(t.affine(x));
    return u;
}

// P(x(z)) + D^-(z). At the optimum z_i supports -u_i, hence the sign flip.
double gap_of(const Surrogate& model, const std::vector<Vector>& z, const std::vector<Vector>& u) {
    double gap = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        gap += fenchel_gap(model.terms[i].norm, model.terms[i].weight, -z[i], u[i]);
    }
    return gap;
}

std::vector<Vector> raw(const DualBlocks& duals) {
    std::vector<Vector> z;
    z.reserve(duals.size());
    for (const auto& d : duals) z.push_back(d.z);
    return z;
}

DualBlocks wrap(const Surrogate& model, std::vector<Vector> z) {
    DualBlocks out;
    out.reserve(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.push_back({std::move(z[i]), model.terms[i].weight, model.terms[i].norm});
    }
    return out;
}

// a <- (1 - t) a + t b, blockwise
void blend(std::vector<Vector>& out, const std::vector<Vector>& a, const std::vector<Vector>& b, double t) {
    out.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - t) * a[i] + t * b[i];
}

double residual_norm(const Surrogate& model, const std::vector<Vector>& z, const Vector& x_hat) {
    Vector r = model.metric.apply(x_hat - model.x);
    r += reduced_gradient(model, z);
    return r.norm();
}

}  // namespace

Vector recover_primal(const Surrogate& model, const DualBlocks& duals) {
    check_duals(model, duals);
    if (model.x.size() != model.metric.dim()) throw_dimension("recover_primal x", model.metric.dim(), model.x.size());
    if (model.gradient.size() != model.metric.dim()) {
        throw_dimension("recover_primal gradient", model.metric.dim(), model.gradient.size());
    }
    return primal_at(model, raw(duals));
}

double dual_objective(const Surrogate& model, const DualBlocks& duals) {
    check_duals(model, duals);
    const auto z = raw(duals);
    const Vector r = reduced_gradient(model, z);
    const Vector d = -model.metric.inv_apply(r);
    // ghat(x) = g + grad^T d + 1/2 d^T H d, and H d = -r.
    const double ghat = model.g_value + model.gradient.dot(d) - 0.5 * d.dot(r);
    const Vector x_hat = model.x + d;
    double coupling = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) coupling += z[i].dot(model.terms[i].affine(x_hat));
    return -(ghat - coupling);
}

std::vector<Vector> dual_gradient(const Surrogate& model, const DualBlocks& duals) {
    return affine_blocks(model, recover_primal(model, duals));
}

double surrogate_gap(const Surrogate& model, const DualBlocks& duals) {
    const auto z = raw(duals);
    return gap_of(model, z, affine_blocks(model, primal_at(model, z)));
}

double surrogate_value(const Surrogate& model, const Vector& x) {
    const Vector d = x - model.x;
    double value = model.g_value + model.gradient.dot(d) + 0.5 * d.dot(model.metric.apply(d));
    for (const auto& t : model.terms) value += psi_value(t, x);
    return value;
}

double next_theta(double theta) { return 2.0 / (1.0 + std::sqrt(1.0 + 4.0 / (theta * theta))); }

double initial_step_delta(const LbfgsMetric& metric, std::span<const RegularizerTerm> terms) {
    double norm_sum = 0.0;
    for (const auto& t : terms) norm_sum += t.op_norm;
    const double lipschitz = norm_sum * norm_sum * metric.inv_norm_estimate();
    if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) return 1.0;
    return 1.0 / lipschitz;
}

InnerResult solve_surrogate(const Surrogate& model, const DualBlocks& warm, const InnerOptions& options) {
    check_duals(model, warm);
    if (!(options.tolerance > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "solve_surrogate: tolerance must be positive");
    }
    const std::size_t n_terms = model.terms.size();

    std::vector<Vector> z = raw(warm);
    for (std::size_t i = 0; i < n_terms; ++i) {
        z[i] = project_dual_ball(model.terms[i].norm, model.terms[i].weight, z[i]);
    }
    Vector xz = primal_at(model, z);
    std::vector<Vector> uz = affine_blocks(model, xz);
    std::vector<Vector> v = z;
    Vector xv = xz;
    std::vector<Vector> uv = uz;

    double delta = options.initial_delta > 0.0 ? options.initial_delta
                                               : initial_step_delta(model.metric, model.terms);
    double theta = 1.0;

    InnerResult result;
    result.initial_gap = gap_of(model, z, uz);

    // Best candidate seen so far (duals, primal, gap).
    std::vector<Vector> best_z = z;
    Vector best_x = xz;
    double best_gap = result.initial_gap;

    auto finish = [&](bool converged) {
        result.direction = best_x - model.x;
        result.duals = wrap(model, best_z);
        result.gap_estimate = best_gap;
        result.final_delta = delta;
        result.residual = residual_norm(model, best_z, best_x);
        result.converged = converged;
        result.rounds = 1;
        return result;
    };

    auto residual_ok = [&]() {
        const double scale = 1.0 + model.gradient.norm();
        return residual_norm(model, best_z, best_x) <= std::max(options.tolerance, 1e-11) * scale;
    };

    if (!options.fixed_iterations && best_gap <= options.tolerance && residual_ok()) return finish(true);

    std::vector<Vector> y, uy, zn, uzn, vn, uvn;
    for (std::size_t j = 0; j < options.max_inner; ++j) {
        blend(y, v, z, theta);
        blend(uy, uv, uz, theta);
        Vector xzn;
        Vector xvn;
        bool moved = false;
        while (true) {
            const double step = delta / theta;
            zn.resize(n_terms);
            for (std::size_t i = 0; i < n_terms; ++i) {
                zn[i] = project_dual_ball(model.terms[i].norm, model.terms[i].weight, z[i] - step * uy[i]);
            }
            xzn = primal_at(model, zn);
            uzn = affine_blocks(model, xzn);
            blend(vn, v, zn, theta);
            blend(uvn, uv, uzn, theta);
            xvn = (1.0 - theta) * xv + theta * xzn;

            // Upper quadratic bound along d = vn - y: d^T Q d <= ||d||^2 / delta.
            double curvature = 0.0;
            double dist = 0.0;
            for (std::size_t i = 0; i < n_terms; ++i) {
                const Vector d = vn[i] - y[i];
                curvature += d.dot(uvn[i] - uy[i]);
                dist += d.squaredNorm();
            }
            moved = dist > 0.0;
            if (curvature <= dist / delta * (1.0 + 1e-10) || !moved || delta < 1e-300) break;
            delta *= 0.5;
            ++result.backtracks;
        }
        z.swap(zn);
        uz.swap(uzn);
        xz = std::move(xzn);
        v.swap(vn);
        uv.swap(uvn);
        xv = std::move(xvn);
        theta = next_theta(theta);
        // A step that did not move says nothing about the curvature.
        if (moved) delta *= options.growth;
        ++result.inner_iterations;

        const double gap_z = gap_of(model, z, uz);
        const double gap_v = gap_of(model, v, uv);
        if (gap_z <= best_gap || gap_v <= best_gap) {
            if (gap_z <= gap_v) {
                best_gap = gap_z;
                best_z = z;
                best_x = xz;
            } else {
                best_gap = gap_v;
                best_z = v;
                best_x = xv;
            }
        }
        if (!options.fixed_iterations && best_gap <= options.tolerance && residual_ok()) {
            return finish(true);
        }
    }
    return finish(options.fixed_iterations ? best_gap <= options.tolerance : false);
}

InnerResult continuation_solve(const Surrogate& model, const DualBlocks& warm, const InnerOptions& options) {
    if (options.restarts < 1) throw Error(ErrorCode::InvalidArgument, "continuation_solve: restarts < 1");
    if (options.restarts == 1) return solve_surrogate(model, warm, options);

    check_duals(model, warm);
    const double start_gap = surrogate_gap(model, warm);
    InnerOptions round = options;
    round.restarts = 1;
    DualBlocks duals = warm;
    InnerResult total;
    total.initial_gap = start_gap;
    for (std::size_t r = 0; r < options.restarts; ++r) {
        const bool last = r + 1 == options.restarts;
        round.tolerance = last ? options.tolerance
                               : std::max(options.tolerance,
                                          start_gap * std::pow(0.1, static_cast<double>(r + 1)));
        InnerResult res = solve_surrogate(model, duals, round);
        total.inner_iterations += res.inner_iterations;
        total.backtracks += res.backtracks;
        total.rounds += 1;
        total.direction = std::move(res.direction);
        total.gap_estimate = res.gap_estimate;
        total.residual = res.residual;
        total.final_delta = res.final_delta;
        total.converged = res.converged && res.gap_estimate <= options.tolerance;
        duals = std::move(res.duals);
        round.initial_delta = res.final_delta;
        if (total.converged && !options.fixed_iterations) break;
    }
    total.duals = std::move(duals);
    return total;
}

}  // namespace sepqn
