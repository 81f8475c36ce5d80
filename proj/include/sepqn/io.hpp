#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "sepqn/dataset.hpp"
#include "sepqn/solver.hpp"

namespace sepqn {

/// Parses LIBSVM text: `label idx:val idx:val ...` with 1-based, strictly
/// increasing indices. Blank lines and `#` comments are skipped. The
/// feature count is the largest index seen unless `feature_count` > 0.
Dataset parse_libsvm(std::istream& in, Index feature_count = 0, const std::string& source = "<stream>");
Dataset read_libsvm(const std::filesystem::path& path, Index feature_count = 0);

/// Writes values with 17 significant digits so that a re-read is exact.
void write_libsvm(std::ostream& out, const Dataset& data);
void write_libsvm(const std::filesystem::path& path, const Dataset& data);

/// Stacks the rows of several datasets; the feature count is the maximum.
Dataset concatenate(const std::vector<Dataset>& parts);

struct SynthOptions {
    std::uint64_t seed = 1;
    Index samples = 100;
    Index features = 10;
    /// Probability that a piecewise-constant block of the truth is zero.
    double sparsity = 0.5;
    /// Generative model: any built-in model name or "least-squares".
    std::string model = "l1-logistic";
    /// Fraction of nonzero feature entries.
    double density = 1.0;
    /// Correlation between neighbouring feature columns (0 = independent).
    double correlation = 0.0;
    /// Number of classes for the multitask model.
    Index classes = 3;
    /// Length of the constant blocks of the truth (0 = max(1, p / 10)).
    Index block = 0;
};

struct SynthResult {
    Dataset data;
    /// Ground truth (p, or p * classes for multitask), diagnostics only.
    Vector truth;
};

SynthResult synth_dataset(const SynthOptions& options);

/// Columns: iter,objective,step,inner_iters,epochs,seconds,sigma,beta
void write_trace_csv(std::ostream& out, const SolveTrace& trace);
/// One value per line.
void write_vector(std::ostream& out, const Vector& x);
Vector read_vector(std::istream& in);

std::string format_double(double value);

}  // namespace sepqn
