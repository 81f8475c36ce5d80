#pragma once

#include <vector>

#include "sepqn/linalg.hpp"

namespace sepqn {

/// Design matrix plus raw labels, as read from disk or synthesized.
struct Dataset {
    SparseMatrix features;  // n x p
    std::vector<double> labels;

    Index samples() const { return features.rows(); }
    Index dimension() const { return features.cols(); }
    Index nnz() const { return features.nnz(); }
};

/// Maps a two-valued label set onto {-1, +1} (smaller value -> -1).
/// A single-valued set is accepted when it is already -1, 0 or +1.
std::vector<double> binary_labels(const std::vector<double>& raw);

/// Distinct label values in ascending order.
std::vector<double> label_classes(const std::vector<double>& raw);

}  // namespace sepqn
