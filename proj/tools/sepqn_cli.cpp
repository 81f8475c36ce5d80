#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sepqn/error.hpp"
#include "sepqn/runner.hpp"

using namespace sepqn;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, sep)) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

std::string default_output_dir() {
    const char* env = std::getenv("SEPQN_OUTPUT_DIR");
    return env && *env ? env : "sepqn-out";
}

struct SpecFlags {
    std::vector<std::string> data;
    std::string solvers = "sepqn";
    std::string inner_policy = "fixed";
    std::string out = default_output_dir();
};

void add_spec_options(CLI::App* cmd, RunSpec& spec, SpecFlags& flags, bool multi) {
    cmd->add_option("--data", flags.data, "LIBSVM file(s); omit to use a synthetic dataset");
    cmd->add_option("--features", spec.feature_count, "Override the feature count");
    cmd->add_option("--model", spec.model, "Model name")->capture_default_str();
    cmd->add_option("--lambda", spec.params.lambda, "l1 weight (default 2/n)");
    cmd->add_option("--fused", spec.params.fused, "Total-variation weight (default lambda)");
    cmd->add_option("--gamma", spec.params.gamma, "Group weight (default lambda)");
    cmd->add_option("--group-size", spec.params.group_size, "Contiguous group size (default 10)");
    cmd->add_option("--ridge", spec.params.ridge, "Ridge term added to the loss");
    if (multi) {
        cmd->add_option("--solvers", flags.solvers, "Comma-separated: sepqn,fista,admm,scd-direct")
            ->capture_default_str();
    } else {
        cmd->add_option("--solver", flags.solvers, "sepqn, fista, admm or scd-direct")->capture_default_str();
    }
    cmd->add_option("--out", flags.out, "Output directory (env SEPQN_OUTPUT_DIR)")->capture_default_str();
    cmd->add_option("--seed", spec.seed, "Seed")->capture_default_str();
    cmd->add_flag("--timing", spec.timing, "Record wall-clock seconds in traces");
    cmd->add_option("--samples", spec.synth.samples, "Synthetic sample count")->capture_default_str();
    cmd->add_option("--dim", spec.synth.features, "Synthetic feature count")->capture_default_str();
    cmd->add_option("--sparsity", spec.synth.sparsity, "Synthetic truth sparsity")->capture_default_str();
    cmd->add_option("--classes", spec.synth.classes, "Synthetic class count (multitask)")->capture_default_str();

    auto& s = spec.solver;
    cmd->add_option("--alpha", s.alpha, "Sufficient-decrease constant")->capture_default_str();
    cmd->add_option("--backtrack", s.backtrack_factor, "Line-search shrink factor")->capture_default_str();
    cmd->add_option("--tol", s.outer_tolerance, "Outer relative-change tolerance")->capture_default_str();
    cmd->add_option("--stall", s.stall_iterations, "Stalled iterations before stopping")->capture_default_str();
    cmd->add_option("--max-outer", s.max_outer, "Outer iteration cap")->capture_default_str();
    cmd->add_option("--memory", s.memory, "LBFGS memory")->capture_default_str();
    cmd->add_option("--inner-tol", s.inner_tolerance, "Inner duality-gap tolerance");
    cmd->add_option("--inner-policy", flags.inner_policy, "fixed or forcing")->capture_default_str();
    cmd->add_option("--max-inner", s.max_inner, "Inner iteration cap")->capture_default_str();
    cmd->add_option("--restarts", s.restarts, "Continuation rounds")->capture_default_str();
    cmd->add_option("--sigma0", s.initial_sigma, "Initial metric scale (default Lipschitz bound)");
    cmd->add_flag("!--no-warm-start", s.warm_start, "Disable dual warm start");
    cmd->add_flag("!--no-adaptive-h0", s.adaptive_h0, "Disable adaptive initial Hessian");

    auto& b = spec.baseline;
    cmd->add_option("--baseline-iters", b.max_iterations, "Baseline iteration cap")->capture_default_str();
    cmd->add_option("--baseline-tol", b.tolerance, "Baseline tolerance")->capture_default_str();
    cmd->add_option("--rho", b.rho, "ADMM penalty")->capture_default_str();
}

void finish_spec(RunSpec& spec, const SpecFlags& flags) {
    spec.data_paths.assign(flags.data.begin(), flags.data.end());
    spec.output_dir = flags.out;
    spec.solvers.clear();
    for (const auto& name : split(flags.solvers, ',')) spec.solvers.push_back(parse_solver_kind(name));
    if (flags.inner_policy == "fixed") {
        spec.solver.inner_policy = InnerTolerancePolicy::Fixed;
    } else if (flags.inner_policy == "forcing") {
        spec.solver.inner_policy = InnerTolerancePolicy::Forcing;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown inner policy '" + flags.inner_policy + "'");
    }
}

int report_run(const RunReport& report) {
    for (const auto& o : report.outcomes) {
        if (o.ok()) {
            std::cout << to_string(o.kind) << ": objective " << format_double(o.solution->objective) << " status "
                      << o.solution->trace.status << " iterations " << o.solution->trace.records.size()
                      << " -> " << o.summary_path.string() << '\n';
        } else {
            std::cout << to_string(o.kind) << ": error " << o.error_code << ": " << o.error_message << '\n';
        }
    }
    if (!report.consensus_path.empty()) {
        std::cout << "max relative gap " << format_double(report.max_relative_gap) << " -> "
                  << report.consensus_path.string() << '\n';
    }
    if (!report.ok()) {
        for (const auto& o : report.outcomes) {
            if (!o.ok()) {
                std::cerr << "error: " << o.error_code << '\n';
                break;
            }
        }
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proximal quasi-Newton solver for composite regularized losses"};
    app.require_subcommand(1);

    RunSpec solve_spec;
    SpecFlags solve_flags;
    auto* solve_cmd = app.add_subcommand("solve", "Run one solver and write its artifacts");
    add_spec_options(solve_cmd, solve_spec, solve_flags, false);

    RunSpec compare_spec;
    SpecFlags compare_flags;
    compare_flags.solvers = "sepqn,fista,admm";
    auto* compare_cmd = app.add_subcommand("compare", "Run several solvers and report consensus");
    add_spec_options(compare_cmd, compare_spec, compare_flags, true);

    BenchOptions bench_opts;
    std::string bench_axes = "p,n,N";
    std::string bench_csv;
    auto* bench_cmd = app.add_subcommand("bench", "Per-iteration cost when doubling p, n and N");
    bench_cmd->add_option("--seed", bench_opts.seed)->capture_default_str();
    bench_cmd->add_option("--outer", bench_opts.outer_iterations, "Outer iterations per run")->capture_default_str();
    bench_cmd->add_option("--inner", bench_opts.inner_iterations, "Inner iterations per outer")->capture_default_str();
    bench_cmd->add_option("--axes", bench_axes, "Subset of p,n,N")->capture_default_str();
    bench_cmd->add_option("--csv", bench_csv, "Write the sweep as CSV");

    SynthOptions synth;
    std::string synth_out;
    std::string truth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset in LIBSVM format");
    synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
    synth_cmd->add_option("--samples", synth.samples)->capture_default_str();
    synth_cmd->add_option("--dim", synth.features)->capture_default_str();
    synth_cmd->add_option("--sparsity", synth.sparsity)->capture_default_str();
    synth_cmd->add_option("--density", synth.density)->capture_default_str();
    synth_cmd->add_option("--model", synth.model)->capture_default_str();
    synth_cmd->add_option("--classes", synth.classes)->capture_default_str();
    synth_cmd->add_option("--out", synth_out, "LIBSVM output path")->required();
    synth_cmd->add_option("--truth", truth_out, "Write the ground truth, one value per line");

    std::uint64_t check_seed = 1;
    auto* check_cmd = app.add_subcommand("check", "Run the module property checks");
    check_cmd->add_option("--seed", check_seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve_cmd) {
            finish_spec(solve_spec, solve_flags);
            if (solve_spec.solvers.size() != 1) throw Error(ErrorCode::InvalidArgument, "solve takes one solver");
            return report_run(run(solve_spec));
        }
        if (*compare_cmd) {
            finish_spec(compare_spec, compare_flags);
            return report_run(run(compare_spec));
        }
        if (*bench_cmd) {
            bench_opts.axes = split(bench_axes, ',');
            const auto results = bench(bench_opts);
            write_bench_csv(std::cout, results);
            if (!bench_csv.empty()) {
                std::ofstream out(bench_csv);
                write_bench_csv(out, results);
            }
            return 0;
        }
        if (*synth_cmd) {
            const SynthResult result = synth_dataset(synth);
            write_libsvm(std::filesystem::path(synth_out), result.data);
            if (!truth_out.empty()) {
                std::ofstream out(truth_out);
                write_vector(out, result.truth);
            }
            std::cout << "n=" << result.data.samples() << " p=" << result.data.dimension()
                      << " nnz=" << result.data.nnz() << '\n';
            return 0;
        }
        if (*check_cmd) {
            bool all = true;
            for (const auto& r : run_property_checks(check_seed)) {
                std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
                all = all && r.pass;
            }
            return all ? 0 : 1;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: Io: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
