#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sepqn/dual_cones.hpp"
#include "sepqn/error.hpp"
#include "sepqn/runner.hpp"
#include "sepqn/scd.hpp"

namespace sepqn {

namespace {

Vector random_vector(std::mt19937_64& rng, Index n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(3);
    out << std::scientific << v;
    return out.str();
}

CheckResult check_adjoint(std::mt19937_64& rng) {
    const Index p = 17;
    DenseMatrix dense = DenseMatrix::Random(5, p);
    std::vector<LinearOperator> ops{
        LinearOperator::identity(p), LinearOperator::first_difference(p),
        LinearOperator::group_selector(p, {3, 0, 9}),
        LinearOperator::explicit_sparse(SparseMatrix::from_dense(dense))};
    ops.push_back(LinearOperator::row_stack(ops));
    double worst = 0.0;
    for (const auto& op : ops) {
        const Vector x = random_vector(rng, p);
        const Vector u = random_vector(rng, op.output_dim());
        const double lhs = op.apply(x).dot(u);
        const double rhs = x.dot(op.apply_transpose(u));
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    return {"linalg: <Wx,u> = <x,W^T u>", worst <= 1e-12, "max rel err " + fmt(worst)};
}

CheckResult check_gradient(std::uint64_t seed) {
    SynthOptions synth;
    synth.seed = seed;
    synth.samples = 60;
    synth.features = 8;
    const Dataset data = synth_dataset(synth).data;
    const SmoothLoss loss = SmoothLoss::logistic(data.features, binary_labels(data.labels), 1, 0.01);
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const Vector x = random_vector(rng, loss.dimension());
        const Vector g = loss.value_grad(x).gradient;
        const double h = 1e-6;
        for (Index j = 0; j < x.size(); ++j) {
            Vector xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd = (loss.value(xp) - loss.value(xm)) / (2 * h);
            worst = std::max(worst, std::abs(fd - g[j]) / std::max(1e-3, std::abs(g[j])));
        }
    }
    return {"problem: gradient matches central differences", worst <= 1e-6, "max rel err " + fmt(worst)};
}

CheckResult check_lbfgs(std::mt19937_64& rng) {
    const Index p = 12;
    LbfgsMetric metric(p, 5, 0.7);
    for (int k = 0; k < 8; ++k) {
        const Vector s = random_vector(rng, p);
        DenseMatrix b = DenseMatrix::Random(p, p);
        const DenseMatrix spd = b.transpose() * b + DenseMatrix::Identity(p, p);
        metric.push_pair(s, spd * s);
    }
    const DenseMatrix h = metric.materialize_dense();
    const DenseMatrix hinv = metric.materialize_inverse_dense();
    const double err = (h * hinv - DenseMatrix::Identity(p, p)).norm();
    const double min_eig = Eigen::SelfAdjointEigenSolver<DenseMatrix>(0.5 * (h + h.transpose())).eigenvalues().minCoeff();
    return {"lbfgs: apply and inv_apply are inverse and PD", err <= 1e-8 && min_eig > 0.0,
            "||H H^-1 - I|| " + fmt(err) + ", min eig " + fmt(min_eig)};
}

CheckResult check_projection(std::mt19937_64& rng) {
    bool ok = true;
    double worst = 0.0;
    for (NormKind norm : {NormKind::L1, NormKind::L2Group, NormKind::LInf}) {
        for (int trial = 0; trial < 20; ++trial) {
            const Vector v = random_vector(rng, 9, 2.0);
            const Vector z = project_dual_ball(norm, 0.8, v);
            ok = ok && dual_norm_value(norm, z) <= 0.8 * (1 + 1e-12);
            worst = std::max(worst, (project_dual_ball(norm, 0.8, z) - z).norm());
            const Vector u = random_vector(rng, 9);
            ok = ok && fenchel_gap(norm, 0.8, z, u) >= -1e-12;
        }
    }
    ok = ok && worst <= 1e-12;
    return {"dual-cones: projections feasible, idempotent, gap >= 0", ok, "idempotence err " + fmt(worst)};
}

CheckResult check_soft_threshold(std::mt19937_64& rng) {
    const Index p = 20;
    const double sigma = 1.7;
    const double lambda = 0.3;
    LbfgsMetric metric(p, 5, sigma);
    const Vector x = random_vector(rng, p);
    const Vector grad = random_vector(rng, p);
    std::vector<RegularizerTerm> terms;
    terms.emplace_back(NormKind::L1, lambda, LinearOperator::identity(p));
    const Surrogate model{metric, x, grad, 0.0, terms};
    InnerOptions options;
    options.tolerance = 1e-10;
    options.max_inner = 5000;
    const InnerResult result = solve_surrogate(model, zero_duals(terms), options);
    const Vector expected = prox_norm(NormKind::L1, lambda / sigma, x - grad / sigma) - x;
    const double err = (result.direction - expected).lpNorm<Eigen::Infinity>();
    return {"scd: surrogate solve equals soft-threshold prox", err <= 1e-8, "max err " + fmt(err)};
}

CheckResult check_libsvm_roundtrip(std::uint64_t seed) {
    SynthOptions synth;
    synth.seed = seed;
    synth.samples = 30;
    synth.features = 15;
    synth.density = 0.4;
    const Dataset data = synth_dataset(synth).data;
    std::stringstream buffer;
    write_libsvm(buffer, data);
    const Dataset back = parse_libsvm(buffer, data.dimension());
    const bool ok = back.samples() == data.samples() && back.dimension() == data.dimension() &&
                    back.nnz() == data.nnz() && back.labels == data.labels &&
                    back.features.values() == data.features.values() &&
                    back.features.col_idx() == data.features.col_idx();
    return {"io: LIBSVM write/read roundtrip is exact", ok, "nnz " + std::to_string(data.nnz())};
}

CheckResult check_monotone(std::uint64_t seed) {
    SynthOptions synth;
    synth.seed = seed;
    synth.samples = 200;
    synth.features = 30;
    synth.model = "fused-sparse-logistic";
    const Dataset data = synth_dataset(synth).data;
    ModelParams params;
    params.lambda = params.fused = 2.0 / 200;
    const CompositeProblem problem = make_builtin("fused-sparse-logistic", data, params);
    SolverConfig config;
    config.record_time = false;
    const Solution sol = solve(problem, config);
    bool ok = true;
    double prev = sol.trace.initial_objective;
    for (const auto& r : sol.trace.records) {
        ok = ok && r.objective <= prev;
        prev = r.objective;
    }
    return {"sepqn: objective is non-increasing", ok,
            std::to_string(sol.trace.records.size()) + " iterations, status " + sol.trace.status};
}

}  // namespace

std::vector<CheckResult> run_property_checks(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::function<CheckResult()>> checks{
        [&] { return check_adjoint(rng); },
        [&] { return check_gradient(seed); },
        [&] { return check_lbfgs(rng); },
        [&] { return check_projection(rng); },
        [&] { return check_soft_threshold(rng); },
        [&] { return check_libsvm_roundtrip(seed); },
        [&] { return check_monotone(seed); },
    };
    std::vector<CheckResult> results;
    for (auto& check : checks) {
        try {
            results.push_back(check());
        } catch (const Error& e) {
            results.push_back({"(check threw)", false, e.what()});
        }
    }
    return results;
}

}  // namespace sepqn
