#include "sepqn/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <random>

#include <json.hpp>

#include "sepqn/error.hpp"

namespace sepqn {

const char* to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::Sepqn: return "sepqn";
        case SolverKind::Fista: return "fista";
        case SolverKind::Admm: return "admm";
        case SolverKind::ScdDirect: return "scd-direct";
    }
    return "unknown";
}

SolverKind parse_solver_kind(const std::string& name) {
    if (name == "sepqn") return SolverKind::Sepqn;
    if (name == "fista") return SolverKind::Fista;
    if (name == "admm") return SolverKind::Admm;
    if (name == "scd-direct") return SolverKind::ScdDirect;
    throw Error(ErrorCode::InvalidArgument, "unknown solver '" + name + "'");
}

void RunSpec::validate() const {
    for (const auto& path : data_paths) {
        if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "data file not found: " + path.string());
    }
    if (solvers.empty()) throw Error(ErrorCode::InvalidArgument, "no solver selected");
    const auto& names = builtin_model_names();
    if (std::find(names.begin(), names.end(), model) == names.end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown model '" + model + "'");
    }
    if (!default_weights && !(params.lambda > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
    }
    if (params.lambda < 0.0 || params.fused < 0.0 || params.gamma < 0.0 || params.ridge < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "hyperparameters must be positive");
    }
    solver.validate();
}

bool RunReport::ok() const {
    return std::all_of(outcomes.begin(), outcomes.end(), [](const RunOutcome& o) { return o.ok(); });
}

Dataset load_dataset(const RunSpec& spec) {
    if (spec.data_paths.empty()) {
        SynthOptions synth = spec.synth;
        synth.seed = spec.seed;
        synth.model = spec.model;
        return synth_dataset(synth).data;
    }
    std::vector<Dataset> parts;
    for (const auto& path : spec.data_paths) parts.push_back(read_libsvm(path, spec.feature_count));
    return concatenate(parts);
}

CompositeProblem build_problem(const RunSpec& spec, const Dataset& data) {
    ModelParams params = spec.params;
    if (spec.default_weights) {
        const double two_over_n = 2.0 / static_cast<double>(data.samples());
        if (params.lambda <= 0.0) params.lambda = two_over_n;
        if (params.fused <= 0.0) params.fused = params.lambda;
        if (params.gamma <= 0.0) params.gamma = params.lambda;
    }
    if (params.groups.empty() && params.group_size < 1) params.group_size = 10;
    return make_builtin(spec.model, data, params);
}

Solution run_solver(SolverKind kind, const CompositeProblem& problem, const RunSpec& spec) {
    SolverConfig solver = spec.solver;
    BaselineConfig baseline = spec.baseline;
    solver.record_time = spec.timing;
    baseline.record_time = spec.timing;
    switch (kind) {
        case SolverKind::Sepqn: return solve(problem, solver);
        case SolverKind::Fista: baseline.kind = BaselineKind::Fista; return fista_solve(problem, baseline);
        case SolverKind::Admm: baseline.kind = BaselineKind::Admm; return admm_solve(problem, baseline);
        case SolverKind::ScdDirect:
            baseline.kind = BaselineKind::ScdDirect;
            return scd_direct_solve(problem, baseline);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown solver kind");
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

namespace {

nlohmann::json summary_json(const RunSpec& spec, const CompositeProblem& problem, const Dataset& data,
                            const RunOutcome& outcome) {
    nlohmann::json j;
    j["solver"] = to_string(outcome.kind);
    j["model"] = spec.model;
    j["seed"] = spec.seed;
    j["n"] = data.samples();
    j["p"] = data.dimension();
    j["nnz"] = data.nnz();
    j["dimension"] = problem.dimension();
    j["terms"] = problem.term_count();
    if (!outcome.ok()) {
        j["status"] = "error";
        j["error"] = {{"code", outcome.error_code}, {"message", outcome.error_message}};
        return j;
    }
    const Solution& sol = *outcome.solution;
    const auto& tr = sol.trace;
    j["status"] = tr.status;
    j["final_objective"] = sol.objective;
    j["initial_objective"] = tr.initial_objective;
    j["iterations"] = tr.records.size();
    j["total_epochs"] = tr.total_epochs;
    j["total_inner_iterations"] = tr.total_inner;
    j["seconds"] = tr.seconds;
    j["flops"] = tr.flops.total();
    j["sigma_floor_hits"] = tr.sigma_floor_hits;
    j["inner_failures"] = tr.inner_failures;
    j["nonzeros"] = (sol.x.array() != 0.0).count();
    if (outcome.kind == SolverKind::Sepqn) j["unit_step_tail"] = unit_step_tail(tr);
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
}

}  // namespace

RunReport run(const RunSpec& spec) {
    spec.validate();
    const Dataset data = load_dataset(spec);
    const CompositeProblem problem = build_problem(spec, data);
    std::filesystem::create_directories(spec.output_dir);

    auto run_one = [&](SolverKind kind) {
        RunOutcome outcome;
        outcome.kind = kind;
        try {
            outcome.solution = run_solver(kind, problem, spec);
        } catch (const Error& e) {
            outcome.error_code = to_string(e.code());
            outcome.error_message = e.what();
        }
        return outcome;
    };

    RunReport report;
    if (spec.solvers.size() == 1) {
        report.outcomes.push_back(run_one(spec.solvers.front()));
    } else {
        std::vector<std::future<RunOutcome>> futures;
        for (auto kind : spec.solvers) futures.push_back(std::async(std::launch::async, run_one, kind));
        for (auto& fut : futures) report.outcomes.push_back(fut.get());
    }

    for (auto& outcome : report.outcomes) {
        const std::string stem = to_string(outcome.kind);
        outcome.summary_path = spec.output_dir / (stem + ".summary.json");
        write_text(outcome.summary_path, summary_json(spec, problem, data, outcome).dump(2) + "\n");
        if (!outcome.ok()) continue;
        outcome.trace_path = spec.output_dir / (stem + ".trace.csv");
        outcome.solution_path = spec.output_dir / (stem + ".solution.txt");
        std::ofstream trace(outcome.trace_path, std::ios::binary);
        write_trace_csv(trace, outcome.solution->trace);
        std::ofstream vec(outcome.solution_path, std::ios::binary);
        write_vector(vec, outcome.solution->x);
    }

    if (report.outcomes.size() > 1) {
        nlohmann::json consensus;
        consensus["pairs"] = nlohmann::json::array();
        for (std::size_t a = 0; a < report.outcomes.size(); ++a) {
            for (std::size_t b = a + 1; b < report.outcomes.size(); ++b) {
                const auto& oa = report.outcomes[a];
                const auto& ob = report.outcomes[b];
                if (!oa.ok() || !ob.ok()) continue;
                const double gap = relative_gap(oa.solution->objective, ob.solution->objective);
                report.max_relative_gap = std::max(report.max_relative_gap, gap);
                consensus["pairs"].push_back(
                    {{"a", to_string(oa.kind)}, {"b", to_string(ob.kind)}, {"relative_gap", gap}});
            }
        }
        consensus["max_relative_gap"] = report.max_relative_gap;
        report.consensus_path = spec.output_dir / "consensus.json";
        write_text(report.consensus_path, consensus.dump(2) + "\n");
    }
    return report;
}

CompositeProblem make_scaling_problem(std::uint64_t seed, Index n, Index p, std::size_t dense_groups,
                                      Index group_rows, bool fused) {
    SynthOptions synth;
    synth.seed = seed;
    synth.samples = n;
    synth.features = p;
    synth.model = "l1-logistic";
    const Dataset data = synth_dataset(synth).data;
    const double weight = 2.0 / static_cast<double>(n);
    std::vector<RegularizerTerm> terms;
    terms.emplace_back(NormKind::L1, weight, LinearOperator::identity(p));
    if (fused) terms.emplace_back(NormKind::L1, weight, LinearOperator::first_difference(p));
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal;
    const double scale = 1.0 / std::sqrt(static_cast<double>(p));
    for (std::size_t g = 0; g < dense_groups; ++g) {
        DenseMatrix dense(group_rows, p);
        for (Index r = 0; r < group_rows; ++r) {
            for (Index c = 0; c < p; ++c) dense(r, c) = normal(rng) * scale;
        }
        terms.emplace_back(NormKind::L2Group, weight,
                           LinearOperator::explicit_sparse(SparseMatrix::from_dense(dense)));
    }
    return CompositeProblem(SmoothLoss::logistic(data.features, binary_labels(data.labels)), std::move(terms));
}

BenchPoint measure_cost(const CompositeProblem& problem, const BenchOptions& options) {
    SolverConfig config;
    config.max_outer = options.outer_iterations;
    config.max_inner = options.inner_iterations;
    config.restarts = 1;
    config.fixed_inner_iterations = true;
    config.outer_tolerance = 0.0;
    config.stall_iterations = options.outer_iterations + 1;
    config.record_time = true;
    const Solution sol = solve(problem, config);
    BenchPoint point;
    point.n = problem.loss().samples();
    point.p = problem.dimension();
    point.terms = problem.term_count();
    point.iterations = sol.trace.records.size();
    double flops_sum = 0.0;
    for (const auto& r : sol.trace.records) flops_sum += static_cast<double>(r.flops);
    const double iters = static_cast<double>(std::max<std::size_t>(1, point.iterations));
    point.flops_per_iteration = flops_sum / iters;
    point.seconds_per_iteration = sol.trace.records.empty() ? 0.0 : sol.trace.records.back().seconds / iters;
    return point;
}

std::vector<BenchAxisResult> bench(const BenchOptions& options) {
    struct Setup {
        Index n;
        Index p;
        std::size_t groups;
        Index rows;
        bool fused;
    };
    std::vector<BenchAxisResult> results;
    for (const auto& axis : options.axes) {
        Setup base{};
        Setup doubled{};
        if (axis == "p") {
            base = {2000, 100, 2, 20, true};
            doubled = base;
            doubled.p *= 2;
        } else if (axis == "n") {
            base = {4000, 100, 0, 0, true};
            doubled = base;
            doubled.n *= 2;
        } else if (axis == "N") {
            // N = 1 + groups: 8 -> 16 terms.
            base = {500, 100, 7, 50, false};
            doubled = base;
            doubled.groups = 15;
        } else {
            throw Error(ErrorCode::InvalidArgument, "bench: unknown axis '" + axis + "'");
        }
        BenchAxisResult r;
        r.axis = axis;
        r.base = measure_cost(make_scaling_problem(options.seed, base.n, base.p, base.groups, base.rows, base.fused),
                              options);
        r.doubled = measure_cost(
            make_scaling_problem(options.seed, doubled.n, doubled.p, doubled.groups, doubled.rows, doubled.fused),
            options);
        r.ratio = r.doubled.flops_per_iteration / r.base.flops_per_iteration;
        r.time_ratio = r.base.seconds_per_iteration > 0.0
                           ? r.doubled.seconds_per_iteration / r.base.seconds_per_iteration
                           : 0.0;
        r.pass = r.ratio >= options.low && r.ratio <= options.high;
        results.push_back(r);
    }
    return results;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchAxisResult>& results) {
    out << "axis,n,p,terms,n2,p2,terms2,flops_per_iter,flops_per_iter2,ratio,time_ratio,pass\n";
    for (const auto& r : results) {
        out << r.axis << ',' << r.base.n << ',' << r.base.p << ',' << r.base.terms << ',' << r.doubled.n << ','
            << r.doubled.p << ',' << r.doubled.terms << ',' << format_double(r.base.flops_per_iteration) << ','
            << format_double(r.doubled.flops_per_iteration) << ',' << format_double(r.ratio) << ','
            << format_double(r.time_ratio) << ',' << (r.pass ? "pass" : "fail") << '\n';
    }
}

}  // namespace sepqn
