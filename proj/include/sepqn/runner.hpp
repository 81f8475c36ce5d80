#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sepqn/baselines.hpp"
#include "sepqn/io.hpp"
#include "sepqn/solver.hpp"

namespace sepqn {

enum class SolverKind { Sepqn, Fista, Admm, ScdDirect };

const char* to_string(SolverKind kind);
SolverKind parse_solver_kind(const std::string& name);

/// Everything needed to reproduce one benchmark run.
struct RunSpec {
    /// LIBSVM files, stacked row-wise. Empty selects `synth`.
    std::vector<std::filesystem::path> data_paths;
    Index feature_count = 0;
    SynthOptions synth;
    std::string model = "l1-logistic";
    ModelParams params;
    /// Hyperparameters <= 0 default to 2/n (fused and gamma then follow lambda).
    bool default_weights = true;
    std::vector<SolverKind> solvers{SolverKind::Sepqn};
    SolverConfig solver;
    BaselineConfig baseline;
    std::filesystem::path output_dir = ".";
    std::uint64_t seed = 1;
    /// Wall-clock columns; off keeps artifacts byte-identical across runs.
    bool timing = false;

    void validate() const;
};

struct RunOutcome {
    SolverKind kind = SolverKind::Sepqn;
    std::optional<Solution> solution;
    std::string error_code;
    std::string error_message;
    std::filesystem::path trace_path;
    std::filesystem::path summary_path;
    std::filesystem::path solution_path;

    bool ok() const { return solution.has_value(); }
};

struct RunReport {
    std::vector<RunOutcome> outcomes;
    /// Largest pairwise relative gap of final objectives among successful runs.
    double max_relative_gap = 0.0;
    std::filesystem::path consensus_path;

    bool ok() const;
};

Dataset load_dataset(const RunSpec& spec);
CompositeProblem build_problem(const RunSpec& spec, const Dataset& data);

/// Runs one solver on an already-built problem.
Solution run_solver(SolverKind kind, const CompositeProblem& problem, const RunSpec& spec);

/// Builds the problem, runs every requested solver (concurrently when more
/// than one), and writes per-solver solution / trace / summary files plus
/// consensus.json when more than one solver ran.
RunReport run(const RunSpec& spec);

double relative_gap(double a, double b);

struct BenchOptions {
    std::uint64_t seed = 7;
    std::size_t outer_iterations = 8;
    std::size_t inner_iterations = 20;
    /// Axes to sweep: any of "p", "n", "N".
    std::vector<std::string> axes{"p", "n", "N"};
    double low = 1.7;
    double high = 2.3;
};

struct BenchPoint {
    Index n = 0;
    Index p = 0;
    std::size_t terms = 0;
    std::size_t iterations = 0;
    double flops_per_iteration = 0.0;
    double seconds_per_iteration = 0.0;
};

struct BenchAxisResult {
    std::string axis;
    BenchPoint base;
    BenchPoint doubled;
    double ratio = 0.0;
    double time_ratio = 0.0;
    bool pass = false;
};

/// Problem used by the sweeps: lambda ||x||_1 (+ fused ||Fx||_1) plus
/// dense group terms sum_j gamma ||G_j x||_2 with G_j of size group_rows x p.
CompositeProblem make_scaling_problem(std::uint64_t seed, Index n, Index p, std::size_t dense_groups,
                                      Index group_rows, bool fused);

BenchPoint measure_cost(const CompositeProblem& problem, const BenchOptions& options);
std::vector<BenchAxisResult> bench(const BenchOptions& options);
void write_bench_csv(std::ostream& out, const std::vector<BenchAxisResult>& results);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Module-level property checks on random instances.
std::vector<CheckResult> run_property_checks(std::uint64_t seed);

}  // namespace sepqn
