// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sepqn/baselines.hpp"
#include "sepqn/dual_cones.hpp"
#include "sepqn/error.hpp"
#include "sepqn/io.hpp"
#include "sepqn/lbfgs.hpp"
#include "sepqn/runner.hpp"
#include "sepqn/scd.hpp"
#include "sepqn/solver.hpp"

using namespace sepqn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

Vector gaussian(std::mt19937_64& rng, Index n, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

struct Verdict {
    bool pass = true;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. surrogate solve vs soft-threshold prox

Verdict surrogate_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> dim(2, 50);
    std::uniform_real_distribution<double> log_sigma(-2.0, 2.0);
    std::uniform_real_distribution<double> lam(0.05, 1.5);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index p = dim(rng);
        const double sigma = std::pow(10.0, log_sigma(rng));
        const double lambda = lam(rng);
        LbfgsMetric metric(p, 10, sigma);
        const Vector x = gaussian(rng, p);
        const Vector grad = gaussian(rng, p, 2.0);
        std::vector<RegularizerTerm> terms;
        terms.emplace_back(NormKind::L1, lambda, LinearOperator::identity(p));
        const Surrogate model{metric, x, grad, 0.0, terms};
        InnerOptions options;
        options.tolerance = 1e-10;
        options.max_inner = 100000;
        const InnerResult res = solve_surrogate(model, zero_duals(terms), options);
        const Vector oracle = prox_norm(NormKind::L1, lambda / sigma, x - grad / sigma) - x;
        worst = std::max(worst, (res.direction - oracle).lpNorm<Eigen::Infinity>());
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-8 && secs <= 5.0, "max err " + sci(worst) + ", " + sci(secs) + " s"};
}

// ---------------------------------------------------------------------------
// 2 / 4 / 8 share the consensus runs

struct ConsensusRun {
    std::string model;
    std::uint64_t seed;
    std::vector<std::pair<std::string, double>> finals;
    SolveTrace sepqn_trace;
};

CompositeProblem toy_problem(const std::string& model, std::uint64_t seed, Index n, Index p, double ridge = 0.0,
                             double correlation = 0.0) {
    SynthOptions synth;
    synth.correlation = correlation;
    synth.seed = seed;
    synth.samples = n;
    synth.features = p;
    synth.model = model;
    const Dataset data = synth_dataset(synth).data;
    ModelParams params;
    params.lambda = params.fused = params.gamma = 2.0 / static_cast<double>(n);
    params.group_size = 10;
    params.ridge = ridge;
    return make_builtin(model, data, params);
}

SolverConfig tight_sepqn() {
    SolverConfig c;
    c.outer_tolerance = 1e-12;
    c.inner_tolerance = 1e-12;
    c.inner_policy = InnerTolerancePolicy::Forcing;
    c.record_time = false;
    return c;
}

BaselineConfig tight_baseline() {
    BaselineConfig c;
    c.max_iterations = 20000;
    c.tolerance = 1e-12;
    c.record_time = false;
    return c;
}

std::vector<ConsensusRun> consensus_runs;
double consensus_seconds = 0.0;
std::string consensus_error;

void run_consensus() {
    const auto t0 = Clock::now();
    const std::vector<std::string> models{"l1-logistic", "fused-sparse-logistic", "sparse-group-logistic"};
    try {
        for (const auto& model : models) {
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                const CompositeProblem problem = toy_problem(model, seed, 2000, 200);
                ConsensusRun run{model, seed, {}, {}};
                std::mt19937_64 rng(seed * 7919);
                const Vector x0 = gaussian(rng, problem.dimension(), 0.1);
                Solution s = solve(problem, tight_sepqn(), x0);
                run.finals.emplace_back("sepqn", s.objective);
                run.sepqn_trace = s.trace;
                BaselineConfig b = tight_baseline();
                if (model == "l1-logistic") run.finals.emplace_back("fista", fista_solve(problem, b).objective);
                run.finals.emplace_back("admm", admm_solve(problem, b).objective);
                run.finals.emplace_back("scd-direct", scd_direct_solve(problem, b).objective);
                consensus_runs.push_back(std::move(run));
            }
        }
    } catch (const Error& e) {
        consensus_error = e.what();
    }
    consensus_seconds = seconds_since(t0);
}

Verdict consensus() {
    if (!consensus_error.empty()) return {false, "error: " + consensus_error};
    double worst = 0.0;
    std::string where;
    for (const auto& run : consensus_runs) {
        for (std::size_t a = 0; a < run.finals.size(); ++a) {
            for (std::size_t b = a + 1; b < run.finals.size(); ++b) {
                const double gap = relative_gap(run.finals[a].second, run.finals[b].second);
                if (gap > worst) {
                    worst = gap;
                    where = run.model + "/" + std::to_string(run.seed) + " " + run.finals[a].first + " vs " +
                            run.finals[b].first;
                }
            }
        }
    }
    const bool ok = consensus_runs.size() == 15 && worst <= 1e-6 && consensus_seconds <= 120.0;
    return {ok, std::to_string(consensus_runs.size()) + " toys, max rel gap " + sci(worst) + " (" + where + "), " +
                    sci(consensus_seconds) + " s"};
}

Verdict unit_steps() {
    if (!consensus_error.empty() || consensus_runs.empty()) return {false, "consensus runs unavailable"};
    std::size_t good = 0;
    std::string bad;
    for (const auto& run : consensus_runs) {
        if (unit_step_tail(run.sepqn_trace)) {
            ++good;
        } else {
            bad += " " + run.model + "/" + std::to_string(run.seed);
        }
    }
    return {good == consensus_runs.size(),
            std::to_string(good) + "/" + std::to_string(consensus_runs.size()) + " unit-step tails" +
                (bad.empty() ? "" : ", failing:" + bad)};
}

// ---------------------------------------------------------------------------
// 3. superlinear tail and iteration counts

std::size_t iterations_to(const SolveTrace& trace, double target) {
    for (const auto& r : trace.records) {
        if (r.objective <= target) return r.iter;
    }
    return trace.records.size() + 1;  // never reached
}

Verdict superlinear() {
    const double ridge = 1e-4;
    const double correlation = 0.9;
    const CompositeProblem fused = toy_problem("fused-sparse-logistic", 3, 2000, 100, ridge, correlation);

    // Reference optimum from two long solves started away from the measured run.
    SolverConfig ref = tight_sepqn();
    ref.outer_tolerance = 0.0;
    ref.inner_tolerance = 1e-14;
    ref.stall_iterations = 5;
    ref.max_outer = 400;
    std::mt19937_64 rng(33);
    const Solution ref_a = solve(fused, ref, gaussian(rng, fused.dimension(), 0.3));
    const Solution ref_b = solve(fused, ref, gaussian(rng, fused.dimension(), 0.3));
    const Vector& x_star = ref_a.objective <= ref_b.objective ? ref_a.x : ref_b.x;
    const double floor = std::max(1e-9, 10.0 * (ref_a.x - ref_b.x).norm());

    std::vector<Vector> iterates;
    SolverConfig cfg = tight_sepqn();
    cfg.observer = [&](const OuterStep& st) { iterates.push_back(st.x + st.step * st.direction); };
    const Solution run = solve(fused, cfg);

    std::vector<double> err;
    for (const auto& x : iterates) err.push_back((x - x_star).norm());
    // Ratios are only meaningful while the error is above the reference accuracy.
    std::vector<double> ratios;
    for (std::size_t k = 0; k + 1 < err.size() && err[k + 1] > floor; ++k) ratios.push_back(err[k + 1] / err[k]);
    bool tail_ok = ratios.size() >= 5;
    std::string tail_txt;
    if (tail_ok) {
        const std::vector<double> last(ratios.end() - 5, ratios.end());
        for (std::size_t i = 0; i < last.size(); ++i) {
            tail_txt += (i ? "," : "") + sci(last[i]);
            if (i > 0 && !(last[i] < last[i - 1])) tail_ok = false;
        }
        tail_ok = tail_ok && last.back() <= 0.2;
    }

    const double f_star = std::min({ref_a.objective, ref_b.objective, run.objective});
    const double target = f_star + 1e-8;
    const std::size_t k_sepqn = iterations_to(run.trace, target);
    BaselineConfig b = tight_baseline();
    const Solution admm = admm_solve(fused, b);
    const Solution direct = scd_direct_solve(fused, b);
    const std::size_t k_admm = iterations_to(admm.trace, target);
    const std::size_t k_direct = iterations_to(direct.trace, target);

    // FISTA applies to the l1 term alone, so it is compared on the l1 version of the toy.
    const CompositeProblem l1 = toy_problem("l1-logistic", 3, 2000, 100, ridge, correlation);
    const Solution l1_star = solve(l1, ref);
    const Solution l1_run = solve(l1, tight_sepqn());
    const Solution fista = fista_solve(l1, b);
    const double l1_target = std::min({l1_star.objective, l1_run.objective, fista.objective}) + 1e-8;
    const std::size_t k_sepqn_l1 = iterations_to(l1_run.trace, l1_target);
    const std::size_t k_fista = iterations_to(fista.trace, l1_target);

    const bool counts_ok = 2 * k_sepqn < k_admm && 2 * k_sepqn < k_direct && 2 * k_sepqn_l1 < k_fista;
    std::ostringstream out;
    out << "last ratios [" << tail_txt << "] above floor " << sci(floor) << " (" << ratios.size()
        << " measurable); iterations to 1e-8: sepqn " << k_sepqn << " admm " << k_admm << " scd-direct " << k_direct
        << " | l1: sepqn " << k_sepqn_l1 << " fista " << k_fista;
    return {tail_ok && counts_ok, out.str()};
}

// ---------------------------------------------------------------------------
// 5. metric ordering for different initial Hessians

Verdict lbfgs_ordering() {
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<int> dim(2, 20);
    std::uniform_real_distribution<double> log_sigma(-2.0, 2.0);
    double worst_diff = std::numeric_limits<double>::infinity();
    double worst_pd = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 100; ++trial) {
        const Index p = dim(rng);
        const double sigma_b = std::pow(10.0, log_sigma(rng));
        LbfgsMetric a(p, static_cast<std::size_t>(p), 2.0 * sigma_b);
        LbfgsMetric b(p, static_cast<std::size_t>(p), sigma_b);
        const int pairs = std::uniform_int_distribution<int>(1, static_cast<int>(p))(rng);
        for (int k = 0; k < pairs; ++k) {
            const Vector s = gaussian(rng, p);
            DenseMatrix m = DenseMatrix::Random(p, p);
            const DenseMatrix spd = m.transpose() * m + 0.1 * DenseMatrix::Identity(p, p);
            const Vector y = spd * s;
            a.push_pair(s, y);
            b.push_pair(s, y);
        }
        const DenseMatrix ha = a.materialize_dense();
        const DenseMatrix hb = b.materialize_dense();
        auto min_eig = [](const DenseMatrix& m) {
            return Eigen::SelfAdjointEigenSolver<DenseMatrix>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
        };
        worst_diff = std::min(worst_diff, min_eig(ha - hb));
        worst_pd = std::min({worst_pd, min_eig(ha), min_eig(hb)});
    }
    return {worst_diff > -1e-10 && worst_pd > 0.0,
            "min eig(H_a - H_b) " + sci(worst_diff) + ", min eig(H) " + sci(worst_pd)};
}

// ---------------------------------------------------------------------------
// 6. numerical correctness

double fd_gradient_error(const std::function<double(const Vector&)>& f, const Vector& x, const Vector& g) {
    const double h = 1e-6;
    Vector fd(x.size());
    for (Index j = 0; j < x.size(); ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        fd[j] = (f(xp) - f(xm)) / (2 * h);
    }
    return (fd - g).norm() / std::max(1e-8, g.norm());
}

// Brute-force: projected gradient on (1/(2 step))||w - z||^2 + w^T g using bisection projections.
Vector project_bruteforce(NormKind norm, double radius, const Vector& v) {
    if (norm == NormKind::L1) return v.cwiseMax(-radius).cwiseMin(radius);
    if (norm == NormKind::L2Group) return v.norm() <= radius ? v : Vector(v * (radius / v.norm()));
    if (v.lpNorm<1>() <= radius) return v;
    double lo = 0.0, hi = v.cwiseAbs().maxCoeff();
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double s = (v.cwiseAbs().array() - mid).max(0.0).sum();
        (s > radius ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    return v.cwiseSign().cwiseProduct(Vector((v.cwiseAbs().array() - t).max(0.0)));
}

Verdict numerics() {
    std::mt19937_64 rng(606);
    // Loss gradients on every built-in model.
    double worst_g = 0.0;
    for (const std::string model : {"l1-logistic", "multitask-dirty-logistic"}) {
        SynthOptions synth;
        synth.seed = 3;
        synth.samples = 40;
        synth.features = 6;
        synth.model = model;
        const Dataset data = synth_dataset(synth).data;
        ModelParams params;
        params.lambda = params.gamma = 0.01;
        const CompositeProblem problem = make_builtin(model, data, params);
        for (int i = 0; i < 10; ++i) {
            const Vector x = gaussian(rng, problem.dimension());
            worst_g = std::max(worst_g, fd_gradient_error([&](const Vector& v) { return problem.loss().value(v); }, x,
                                                          problem.loss().value_grad(x).gradient));
        }
    }
    // Dual objective gradients.
    double worst_d = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Index p = 6;
        LbfgsMetric metric(p, 5, 1.3);
        for (int k = 0; k < 3; ++k) {
            const Vector s = gaussian(rng, p);
            metric.push_pair(s, 2.0 * s + 0.1 * gaussian(rng, p).cwiseAbs().cwiseProduct(s));
        }
        const Vector x = gaussian(rng, p), grad = gaussian(rng, p);
        std::vector<RegularizerTerm> terms;
        terms.emplace_back(NormKind::L1, 0.5, LinearOperator::identity(p), gaussian(rng, p));
        terms.emplace_back(NormKind::L2Group, 0.3, LinearOperator::first_difference(p));
        terms.emplace_back(NormKind::LInf, 0.7, LinearOperator::group_selector(p, {1, 4, 5}));
        const Surrogate model{metric, x, grad, 0.2, terms};
        DualBlocks duals = zero_duals(terms);
        Vector stacked(terms[0].output_dim() + terms[1].output_dim() + terms[2].output_dim());
        stacked = gaussian(rng, stacked.size(), 0.2);
        auto unstack = [&](const Vector& v) {
            DualBlocks d = duals;
            Index off = 0;
            for (auto& blk : d) {
                blk.z = v.segment(off, blk.z.size());
                off += blk.z.size();
            }
            return d;
        };
        const auto grads = dual_gradient(model, unstack(stacked));
        Vector g(stacked.size());
        Index off = 0;
        for (const auto& gi : grads) {
            g.segment(off, gi.size()) = gi;
            off += gi.size();
        }
        worst_d = std::max(worst_d, fd_gradient_error([&](const Vector& v) { return dual_objective(model, unstack(v)); },
                                                      stacked, g));
    }
    // dual_step vs projected-gradient brute force.
    double worst_step = 0.0;
    for (NormKind norm : {NormKind::L1, NormKind::L2Group, NormKind::LInf}) {
        for (int i = 0; i < 10; ++i) {
            const Index q = 2 + i % 2;
            const double radius = 0.8;
            DualBlock blk{project_bruteforce(norm, radius, gaussian(rng, q)), radius, norm};
            const Vector grad = gaussian(rng, q);
            const double step = 0.7;
            Vector w = blk.z;
            const double eta = 0.05 * step;
            for (int it = 0; it < 100000; ++it) {
                const Vector gw = (w - blk.z) / step + grad;
                w = project_bruteforce(norm, radius, w - eta * gw);
            }
            worst_step = std::max(worst_step, (dual_step(blk, grad, step).z - w).norm());
        }
    }
    // Descent inequality on every accepted direction.
    double worst_descent = -std::numeric_limits<double>::infinity();
    std::size_t checked = 0;
    for (const std::string model : {"l1-logistic", "fused-sparse-logistic", "sparse-group-logistic"}) {
        const CompositeProblem problem = toy_problem(model, 11, 300, 40);
        SolverConfig cfg;
        cfg.record_time = false;
        cfg.observer = [&](const OuterStep& st) {
            const double lhs = st.gradient.dot(st.direction) + psi_total(problem, st.x + st.direction) -
                               psi_total(problem, st.x);
            const double rhs = -st.direction.dot(st.metric.apply(st.direction));
            // Slack scales with the certified surrogate gap.
            worst_descent = std::max(worst_descent, lhs - rhs - std::max(st.inner_gap, st.inner_tolerance));
            ++checked;
        };
        solve(problem, cfg);
    }
    const bool ok = worst_g <= 1e-6 && worst_d <= 1e-6 && worst_step <= 1e-6 && worst_descent <= 0.0;
    std::ostringstream out;
    out << "grad g " << sci(worst_g) << ", grad D " << sci(worst_d) << ", dual_step " << sci(worst_step)
        << ", descent excess " << sci(worst_descent) << " over " << checked << " steps";
    return {ok, out.str()};
}

// ---------------------------------------------------------------------------
// 7. scaling

Verdict scaling() {
    const auto t0 = Clock::now();
    BenchOptions options;
    const auto results = bench(options);
    std::ostringstream out;
    bool ok = true;
    for (const auto& r : results) {
        out << r.axis << " x" << sci(r.ratio) << " ";
        ok = ok && r.pass;
    }
    const double secs = seconds_since(t0);
    out << "(" << sci(secs) << " s)";
    return {ok && secs <= 300.0, out.str()};
}

// ---------------------------------------------------------------------------
// 8. determinism and formats

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
    const auto base = std::filesystem::temp_directory_path() / "sepqn-acceptance";
    std::filesystem::remove_all(base);
    RunSpec spec;
    spec.model = "fused-sparse-logistic";
    spec.synth.samples = 300;
    spec.synth.features = 40;
    spec.seed = 9;
    spec.solvers = {SolverKind::Sepqn, SolverKind::Admm, SolverKind::ScdDirect};
    spec.output_dir = base / "a";
    const RunReport first = run(spec);
    spec.output_dir = base / "b";
    const RunReport second = run(spec);
    bool same = first.ok() && second.ok();
    for (const auto* name : {"sepqn", "admm", "scd-direct"}) {
        for (const auto* suffix : {".trace.csv", ".solution.txt", ".summary.json"}) {
            const std::string file = std::string(name) + suffix;
            same = same && slurp(base / "a" / file) == slurp(base / "b" / file) && !slurp(base / "a" / file).empty();
        }
    }

    SynthOptions synth;
    synth.seed = 4;
    synth.samples = 200;
    synth.features = 60;
    synth.density = 0.3;
    const Dataset data = synth_dataset(synth).data;
    const auto path = base / "roundtrip.svm";
    write_libsvm(path, data);
    const Dataset back = read_libsvm(path, data.dimension());
    const bool roundtrip = back.samples() == data.samples() && back.dimension() == data.dimension() &&
                           back.nnz() == data.nnz() && back.labels == data.labels &&
                           back.features.values() == data.features.values() &&
                           back.features.col_idx() == data.features.col_idx() &&
                           back.features.row_ptr() == data.features.row_ptr();

    // Monotone objective column in every sepqn trace written or run here.
    std::size_t traces = 0;
    bool monotone = true;
    auto check_trace = [&](const SolveTrace& trace) {
        ++traces;
        double prev = trace.initial_objective;
        for (const auto& r : trace.records) {
            monotone = monotone && r.objective <= prev;
            prev = r.objective;
        }
    };
    for (const auto& run : consensus_runs) check_trace(run.sepqn_trace);
    for (const auto& o : first.outcomes) {
        if (o.kind == SolverKind::Sepqn && o.ok()) check_trace(o.solution->trace);
    }
    std::istringstream csv(slurp(base / "a" / "sepqn.trace.csv"));
    std::string line;
    std::getline(csv, line);
    double prev = std::numeric_limits<double>::infinity();
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        const double obj = std::stod(line.substr(line.find(',') + 1));
        monotone = monotone && obj <= prev;
        prev = obj;
        ++rows;
    }
    const bool rows_ok = first.ok() && rows == first.outcomes[0].solution->trace.records.size();
    std::filesystem::remove_all(base);
    return {same && roundtrip && monotone && rows_ok,
            std::string("byte-identical ") + (same ? "yes" : "no") + ", roundtrip " + (roundtrip ? "exact" : "differs") +
                ", monotone " + std::to_string(traces) + " traces " + (monotone ? "yes" : "no") + ", csv rows " +
                (rows_ok ? "match" : "mismatch")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Verdict()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, "surrogate solve matches soft-threshold prox", surrogate_oracle},
        {2, "solvers agree on the optimum", [] {
             run_consensus();
             return consensus();
         }},
        {3, "superlinear tail and iteration advantage", superlinear},
        {4, "unit step length in the tail", unit_steps},
        {5, "metric ordering across initial Hessians", lbfgs_ordering},
        {6, "gradients, dual steps and descent inequality", numerics},
        {7, "per-iteration cost is linear in p, n and N", scaling},
        {8, "determinism and file formats", determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Verdict v;
        const auto t0 = Clock::now();
        try {
            v = c.fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d: %s -- %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        if (!v.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
