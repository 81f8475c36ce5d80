#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sepqn/baselines.hpp"
#include "sepqn/error.hpp"
#include "sepqn/io.hpp"
#include "sepqn/lbfgs.hpp"
#include "sepqn/solver.hpp"

using namespace sepqn;

namespace {

Dataset toy(const std::string& model, Index n, Index p, std::uint64_t seed = 1) {
    SynthOptions o;
    o.seed = seed;
    o.samples = n;
    o.features = p;
    o.model = model;
    return synth_dataset(o).data;
}

// A term whose operator has no rows, so Psi is identically zero.
RegularizerTerm null_term(Index p) {
    return RegularizerTerm(NormKind::L1, 1.0, LinearOperator::explicit_sparse(SparseMatrix::from_triplets(1, p, {})));
}

CompositeProblem least_squares_toy(Index n, Index p, std::uint64_t seed) {
    const Dataset d = toy("l1-logistic", n, p, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = normal(rng);
    return CompositeProblem(SmoothLoss::least_squares(d.features, y), {null_term(p)});
}

DenseMatrix hessian_ls(const CompositeProblem& prob) {
    const DenseMatrix a = prob.loss().data().to_dense();
    return 2.0 / static_cast<double>(a.rows()) * a.transpose() * a;
}

CompositeProblem l1_logistic(Index n, Index p, double lambda, std::uint64_t seed = 1) {
    ModelParams params;
    params.lambda = lambda;
    return make_builtin("l1-logistic", toy("l1-logistic", n, p, seed), params);
}

SolverConfig tight() {
    SolverConfig c;
    c.outer_tolerance = 1e-13;
    c.inner_tolerance = 1e-12;
    c.inner_policy = InnerTolerancePolicy::Forcing;
    c.max_outer = 2000;
    c.record_time = false;
    return c;
}

}  // namespace

TEST_CASE("gamma examples") {
    const auto prob = least_squares_toy(20, 4, 1);
    const Vector x = Vector::Constant(4, 0.1);
    const Vector g = prob.loss().value_grad(x).gradient;
    CHECK(gamma(prob, x, Vector::Zero(4), g) == 0.0);
    const Vector delta = -hessian_ls(prob).ldlt().solve(g);
    CHECK(gamma(prob, x, delta, g) == doctest::Approx(-g.dot(hessian_ls(prob).ldlt().solve(g))));
    CHECK(gamma(prob, x, delta, g) < 0.0);
}

TEST_CASE("gamma bound with an exact surrogate step") {
    // gamma <= -delta^T H delta for the minimizer of the surrogate.
    const auto prob = l1_logistic(80, 10, 0.02);
    const Vector x = Vector::Constant(10, 0.05);
    SolverConfig cfg = tight();
    cfg.max_outer = 1;
    bool seen = false;
    cfg.observer = [&](const OuterStep& st) {
        const double bound = -st.direction.dot(st.metric.apply(st.direction));
        CHECK(st.gamma <= bound + 1e-8);
        seen = true;
    };
    solve(prob, cfg, x);
    CHECK(seen);
}

TEST_CASE("line search examples") {
    const auto prob = least_squares_toy(30, 5, 2);
    const Vector x = Vector::Zero(5);
    const auto vg = prob.loss().value_grad(x);
    const Vector delta = -hessian_ls(prob).ldlt().solve(vg.gradient);
    const double gam = gamma(prob, x, delta, vg.gradient);
    SolverConfig cfg;
    const auto ls = line_search(prob, x, delta, gam, objective(prob, x), cfg);
    CHECK(ls.step == 1.0);
    CHECK(ls.probes == 1);

    const auto none = line_search(prob, x, Vector::Zero(5), 0.0, objective(prob, x), cfg);
    CHECK(none.step == 1.0);
    CHECK(none.value == doctest::Approx(objective(prob, x)));

    CHECK_THROWS_AS(line_search(prob, x, delta, 0.5, objective(prob, x), cfg), Error);
}

TEST_CASE("line search backtracks on an overlong step") {
    const auto prob = least_squares_toy(30, 5, 3);
    const Vector x = Vector::Zero(5);
    const auto vg = prob.loss().value_grad(x);
    const Vector delta = -100.0 * vg.gradient;
    const auto ls = line_search(prob, x, delta, gamma(prob, x, delta, vg.gradient), objective(prob, x), SolverConfig{});
    CHECK(ls.step < 1.0);
    CHECK(ls.probes > 1);
    CHECK(ls.value < objective(prob, x));
}

TEST_CASE("shrunken metric triggers t < 1 and a sigma increase") {
    const auto prob = l1_logistic(200, 20, 0.01, 4);
    SolverConfig cfg;
    cfg.initial_sigma = 1e-3 * prob.loss().lipschitz_bound();
    cfg.record_time = false;
    cfg.max_outer = 30;
    std::vector<double> steps, sigmas;
    cfg.observer = [&](const OuterStep& st) {
        steps.push_back(st.step);
        sigmas.push_back(st.metric.sigma());
    };
    solve(prob, cfg);
    bool found = false;
    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
        if (steps[k] < 1.0 && sigmas[k + 1] > sigmas[k]) found = true;
    }
    CHECK(found);
}

TEST_CASE("least squares reaches the normal-equation solution") {
    const auto prob = least_squares_toy(60, 8, 5);
    const DenseMatrix a = prob.loss().data().to_dense();
    Vector y(a.rows());
    for (Index i = 0; i < y.size(); ++i) y[i] = prob.loss().labels()[static_cast<std::size_t>(i)];
    const Vector oracle = (a.transpose() * a).ldlt().solve(a.transpose() * y);
    const auto sol = solve(prob, tight());
    CHECK((sol.x - oracle).norm() <= 1e-6);
}

TEST_CASE("l1 logistic agrees with FISTA") {
    const auto prob = l1_logistic(200, 50, 2.0 / 200);
    const auto sol = solve(prob, tight());
    BaselineConfig bc;
    bc.kind = BaselineKind::Fista;
    bc.max_iterations = 50000;
    bc.tolerance = 1e-15;
    bc.record_time = false;
    const auto ref = fista_solve(prob, bc);
    CHECK(std::abs(sol.objective - ref.objective) <= 1e-6);
    CHECK(sol.objective <= ref.objective + 1e-10);
}

TEST_CASE("huge lambda gives zero at once") {
    const Dataset d = toy("l1-logistic", 100, 10);
    const auto loss = SmoothLoss::logistic(d.features, binary_labels(d.labels));
    const double lambda = 1.01 * loss.value_grad(Vector::Zero(10)).gradient.cwiseAbs().maxCoeff();
    const CompositeProblem prob(loss, {RegularizerTerm(NormKind::L1, lambda, LinearOperator::identity(10))});
    const auto sol = solve(prob, SolverConfig{});
    CHECK(sol.x.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(sol.trace.records.size() <= 2);
    CHECK(sol.trace.status == "converged");
}

TEST_CASE("trace is monotone and consistent") {
    ModelParams params;
    params.lambda = params.fused = 0.01;
    const auto prob = make_builtin("fused-sparse-logistic", toy("fused-sparse-logistic", 150, 30), params);
    SolverConfig cfg;
    cfg.record_time = false;
    const auto sol = solve(prob, cfg);
    double prev = sol.trace.initial_objective;
    std::size_t epochs = 0;
    for (const auto& r : sol.trace.records) {
        CHECK(r.objective <= prev);
        CHECK(r.step > 0.0);
        CHECK(r.step <= 1.0);
        CHECK(r.gamma < 0.0);
        CHECK(r.epochs >= epochs);
        CHECK(r.sigma >= LbfgsMetric::kSigmaFloor);
        prev = r.objective;
        epochs = r.epochs;
    }
    CHECK(sol.objective == prev);
    CHECK(sol.objective == doctest::Approx(objective(prob, sol.x)).epsilon(1e-14));
}

TEST_CASE("pairs are stored only with positive curvature") {
    const auto prob = l1_logistic(120, 15, 0.01, 6);
    SolverConfig cfg;
    cfg.record_time = false;
    std::vector<Vector> xs, gs;
    cfg.observer = [&](const OuterStep& st) {
        xs.push_back(st.x);
        gs.push_back(st.gradient);
    };
    const auto sol = solve(prob, cfg);
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        const double sy = (xs[k + 1] - xs[k]).dot(gs[k + 1] - gs[k]);
        CHECK(sol.trace.records[k].pair_accepted == (sy > 0.0));
    }
}

TEST_CASE("configuration validation") {
    const auto prob = l1_logistic(20, 3, 0.1);
    SolverConfig cfg;
    cfg.alpha = 0.5;
    CHECK_THROWS_AS(solve(prob, cfg), Error);
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(solve(prob, cfg), Error);
    cfg = SolverConfig{};
    cfg.backtrack_factor = 1.0;
    CHECK_THROWS_AS(solve(prob, cfg), Error);
    cfg = SolverConfig{};
    CHECK_THROWS_AS(solve(prob, cfg, Vector::Zero(4)), Error);
}

TEST_CASE("unit step tail") {
    SolveTrace t;
    for (double s : {0.5, 1.0, 0.25, 1.0, 1.0, 1.0, 1.0, 1.0}) {
        IterationRecord r;
        r.step = s;
        t.records.push_back(r);
    }
    CHECK(unit_step_tail(t));
    t.records.back().step = 0.5;
    CHECK_FALSE(unit_step_tail(t));
}

TEST_CASE("warm start never costs more inner iterations") {
    ModelParams params;
    params.lambda = params.fused = 0.01;
    const auto prob = make_builtin("fused-sparse-logistic", toy("fused-sparse-logistic", 300, 40, 7), params);
    SolverConfig cfg;
    cfg.record_time = false;
    const auto warm = solve(prob, cfg);
    cfg.warm_start = false;
    const auto cold = solve(prob, cfg);
    CHECK(warm.trace.total_inner <= cold.trace.total_inner);
    CHECK(std::abs(warm.objective - cold.objective) <= 1e-6 * std::abs(cold.objective));
}
