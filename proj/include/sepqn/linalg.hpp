#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "sepqn/flops.hpp"

namespace sepqn {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Row-compressed sparse matrix. Column indices are strictly increasing
/// within each row; construction validates this.
class SparseMatrix {
public:
    struct Triplet {
        Index row;
        Index col;
        double value;
    };

    SparseMatrix() = default;

    SparseMatrix(Index rows, Index cols, std::vector<Index> row_ptr, std::vector<Index> col_idx,
                 std::vector<double> values);

    /// Duplicate (row, col) entries are summed; explicit zeros are kept.
    static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets);
    static SparseMatrix from_dense(const DenseMatrix& dense);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index nnz() const { return static_cast<Index>(values_.size()); }

    const std::vector<Index>& row_ptr() const { return row_ptr_; }
    const std::vector<Index>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }

    Vector multiply(const Vector& x, flops::Bucket bucket = flops::Bucket::Data) const;
    Vector multiply_transpose(const Vector& u, flops::Bucket bucket = flops::Bucket::Data) const;

    /// Row dot product a_i^T x for a single row.
    double row_dot(Index row, const Vector& x) const;

    DenseMatrix to_dense() const;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Index> row_ptr_{0};
    std::vector<Index> col_idx_;
    std::vector<double> values_;
};

enum class OperatorKind { ExplicitSparse, Identity, FirstDifference, GroupSelector, RowStack };

const char* to_string(OperatorKind kind);

struct NormEstimate {
    double value = 0.0;
    /// Relative residual of the final Rayleigh quotient; some singular value
    /// lies within value * (1 +/- tolerance).
    double tolerance = 0.0;
};

/// A linear map W: R^p -> R^q. Cheap to copy; immutable after construction.
class LinearOperator {
public:
    static LinearOperator identity(Index p);
    /// (Wx)_j = x_{j+1} - x_j, j = 0..p-2.
    static LinearOperator first_difference(Index p);
    /// Gathers x at `indices` (0-based, each < p, no repeats).
    static LinearOperator group_selector(Index p, std::vector<Index> indices);
    static LinearOperator explicit_sparse(SparseMatrix matrix);
    static LinearOperator row_stack(std::vector<LinearOperator> children);

    OperatorKind kind() const;
    Index input_dim() const { return input_dim_; }
    Index output_dim() const { return output_dim_; }

    /// Group indices for GroupSelector; empty otherwise.
    const std::vector<Index>& indices() const;
    const std::vector<LinearOperator>& children() const;
    const SparseMatrix* matrix() const;

    Vector apply(const Vector& x) const;
    Vector apply_transpose(const Vector& u) const;
    /// out += W^T u
    void add_apply_transpose(const Vector& u, Vector& out) const;

    /// Power iteration on W^T W with a fixed seed.
    NormEstimate norm_estimate(int iterations = 100, std::uint64_t seed = 0x5eed) const;

    /// Flops charged by one apply (or one transpose apply).
    std::uint64_t apply_cost() const;

    std::string describe() const;

private:
    struct Sparse {
        std::shared_ptr<const SparseMatrix> matrix;
    };
    struct Ident {};
    struct Diff {};
    struct Select {
        std::shared_ptr<const std::vector<Index>> indices;
    };
    struct Stack {
        std::shared_ptr<const std::vector<LinearOperator>> children;
    };
    using Impl = std::variant<Sparse, Ident, Diff, Select, Stack>;

    LinearOperator(Impl impl, Index input_dim, Index output_dim)
        : impl_(std::move(impl)), input_dim_(input_dim), output_dim_(output_dim) {}

    void apply_into(const Vector& x, Eigen::Ref<Vector> out) const;
    void add_transpose_into(const Eigen::Ref<const Vector>& u, Vector& out) const;

    Impl impl_;
    Index input_dim_ = 0;
    Index output_dim_ = 0;
};

bool all_finite(const Vector& v);

}  // namespace sepqn
