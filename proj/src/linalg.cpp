#include "sepqn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sepqn/error.hpp"

namespace sepqn {

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Index> row_ptr,
                           std::vector<Index> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
    if (rows_ < 0 || cols_ < 0) {
        throw Error(ErrorCode::InvalidArgument, "SparseMatrix: negative dimension");
    }
    if (static_cast<Index>(row_ptr_.size()) != rows_ + 1 || row_ptr_.front() != 0) {
        throw Error(ErrorCode::InvalidArgument, "SparseMatrix: row pointer array malformed");
    }
    if (col_idx_.size() != values_.size() ||
        row_ptr_.back() != static_cast<Index>(values_.size())) {
        throw Error(ErrorCode::InvalidArgument, "SparseMatrix: nnz does not match value count");
    }
    for (Index r = 0; r < rows_; ++r) {
        if (row_ptr_[r + 1] < row_ptr_[r]) {
            throw Error(ErrorCode::InvalidArgument, "SparseMatrix: row pointers decrease");
        }
        for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            const Index c = col_idx_[k];
            if (c < 0 || c >= cols_) {
                throw Error(ErrorCode::InvalidArgument,
                            "SparseMatrix: column index out of range in row " + std::to_string(r));
            }
            if (k > row_ptr_[r] && col_idx_[k - 1] >= c) {
                throw Error(ErrorCode::InvalidArgument,
                            "SparseMatrix: column indices not strictly increasing in row " +
                                std::to_string(r));
            }
        }
    }
}

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Index> row_ptr(rows + 1, 0);
    std::vector<Index> col_idx;
    std::vector<double> values;
    col_idx.reserve(triplets.size());
    values.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size(); ++k) {
        const auto& t = triplets[k];
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
            throw Error(ErrorCode::InvalidArgument, "SparseMatrix: triplet out of range");
        }
        if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
            values.back() += t.value;
            continue;
        }
        col_idx.push_back(t.col);
        values.push_back(t.value);
        ++row_ptr[t.row + 1];
    }
    std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
    return SparseMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
    std::vector<Triplet> triplets;
    for (Index r = 0; r < dense.rows(); ++r) {
        for (Index c = 0; c < dense.cols(); ++c) {
            if (dense(r, c) != 0.0) triplets.push_back({r, c, dense(r, c)});
        }
    }
    return from_triplets(dense.rows(), dense.cols(), std::move(triplets));
}

Vector SparseMatrix::multiply(const Vector& x, flops::Bucket bucket) const {
    if (x.size() != cols_) throw_dimension("SparseMatrix::multiply", cols_, x.size());
    Vector out(rows_);
    for (Index r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * x[col_idx_[k]];
        out[r] = acc;
    }
    flops::add(bucket, 2 * static_cast<std::uint64_t>(nnz()));
    return out;
}

Vector SparseMatrix::multiply_transpose(const Vector& u, flops::Bucket bucket) const {
    if (u.size() != rows_) throw_dimension("SparseMatrix::multiply_transpose", rows_, u.size());
    Vector out = Vector::Zero(cols_);
    for (Index r = 0; r < rows_; ++r) {
        const double ur = u[r];
        if (ur == 0.0) continue;
        for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[col_idx_[k]] += values_[k] * ur;
    }
    flops::add(bucket, 2 * static_cast<std::uint64_t>(nnz()));
    return out;
}

double SparseMatrix::row_dot(Index row, const Vector& x) const {
    double acc = 0.0;
    for (Index k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) acc += values_[k] * x[col_idx_[k]];
    return acc;
}

DenseMatrix SparseMatrix::to_dense() const {
    DenseMatrix dense = DenseMatrix::Zero(rows_, cols_);
    for (Index r = 0; r < rows_; ++r) {
        for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) dense(r, col_idx_[k]) = values_[k];
    }
    return dense;
}

const char* to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::ExplicitSparse: return "explicit";
        case OperatorKind::Identity: return "identity";
        case OperatorKind::FirstDifference: return "first-difference";
        case OperatorKind::GroupSelector: return "group-selector";
        case OperatorKind::RowStack: return "row-stack";
    }
    return "unknown";
}

LinearOperator LinearOperator::identity(Index p) {
    if (p < 1) throw Error(ErrorCode::InvalidArgument, "identity operator needs p >= 1");
    return LinearOperator(Ident{}, p, p);
}

LinearOperator LinearOperator::first_difference(Index p) {
    if (p < 2) throw Error(ErrorCode::InvalidArgument, "first-difference operator needs p >= 2");
    return LinearOperator(Diff{}, p, p - 1);
}

LinearOperator LinearOperator::group_selector(Index p, std::vector<Index> indices) {
    if (indices.empty()) throw Error(ErrorCode::InvalidArgument, "group selector: empty index set");
    std::vector<Index> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() >= p) {
        throw Error(ErrorCode::InvalidArgument, "group selector: index out of range");
    }
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error(ErrorCode::InvalidArgument, "group selector: repeated index");
    }
    const auto q = static_cast<Index>(indices.size());
    return LinearOperator(Select{std::make_shared<const std::vector<Index>>(std::move(indices))}, p,
                          q);
}

LinearOperator LinearOperator::explicit_sparse(SparseMatrix matrix) {
    const Index p = matrix.cols();
    const Index q = matrix.rows();
    return LinearOperator(Sparse{std::make_shared<const SparseMatrix>(std::move(matrix))}, p, q);
}

LinearOperator LinearOperator::row_stack(std::vector<LinearOperator> children) {
    if (children.empty()) throw Error(ErrorCode::InvalidArgument, "row stack: no children");
    const Index p = children.front().input_dim();
    Index q = 0;
    for (const auto& child : children) {
        if (child.input_dim() != p) {
            throw Error(ErrorCode::DimensionMismatch,
                        "row stack: child input dims differ (" + std::to_string(p) + " vs " +
                            std::to_string(child.input_dim()) + ")");
        }
        q += child.output_dim();
    }
    return LinearOperator(Stack{std::make_shared<const std::vector<LinearOperator>>(std::move(children))},
                          p, q);
}

OperatorKind LinearOperator::kind() const {
    return std::visit(
        [](const auto& impl) {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, Sparse>) return OperatorKind::ExplicitSparse;
            else if constexpr (std::is_same_v<T, Ident>) return OperatorKind::Identity;
            else if constexpr (std::is_same_v<T, Diff>) return OperatorKind::FirstDifference;
            else if constexpr (std::is_same_v<T, Select>) return OperatorKind::GroupSelector;
            else return OperatorKind::RowStack;
        },
        impl_);
}

const std::vector<Index>& LinearOperator::indices() const {
    static const std::vector<Index> empty;
    if (const auto* s = std::get_if<Select>(&impl_)) return *s->indices;
    return empty;
}

const std::vector<LinearOperator>& LinearOperator::children() const {
    static const std::vector<LinearOperator> empty;
    if (const auto* s = std::get_if<Stack>(&impl_)) return *s->children;
    return empty;
}

const SparseMatrix* LinearOperator::matrix() const {
    if (const auto* s = std::get_if<Sparse>(&impl_)) return s->matrix.get();
    return nullptr;
}

std::uint64_t LinearOperator::apply_cost() const {
    return std::visit(
        [this](const auto& impl) -> std::uint64_t {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, Sparse>) {
                return 2 * static_cast<std::uint64_t>(impl.matrix->nnz());
            } else if constexpr (std::is_same_v<T, Stack>) {
                std::uint64_t c = 0;
                for (const auto& child : *impl.children) c += child.apply_cost();
                return c;
            } else {
                return static_cast<std::uint64_t>(output_dim_);
            }
        },
        impl_);
}

void LinearOperator::apply_into(const Vector& x, Eigen::Ref<Vector> out) const {
    std::visit(
        [&](const auto& impl) {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, Sparse>) {
                const auto& m = *impl.matrix;
                for (Index r = 0; r < m.rows(); ++r) out[r] = m.row_dot(r, x);
            } else if constexpr (std::is_same_v<T, Ident>) {
                out = x;
            } else if constexpr (std::is_same_v<T, Diff>) {
                const Index n = output_dim_;
                out = x.segment(1, n) - x.segment(0, n);
            } else if constexpr (std::is_same_v<T, Select>) {
                const auto& idx = *impl.indices;
                for (std::size_t j = 0; j < idx.size(); ++j) out[static_cast<Index>(j)] = x[idx[j]];
            } else {
                Index offset = 0;
                for (const auto& child : *impl.children) {
                    child.apply_into(x, out.segment(offset, child.output_dim()));
                    offset += child.output_dim();
                }
            }
        },
        impl_);
}

void LinearOperator::add_transpose_into(const Eigen::Ref<const Vector>& u, Vector& out) const {
    std::visit(
        [&](const auto& impl) {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, Sparse>) {
                const auto& m = *impl.matrix;
                const auto& rp = m.row_ptr();
                const auto& ci = m.col_idx();
                const auto& va = m.values();
                for (Index r = 0; r < m.rows(); ++r) {
                    const double ur = u[r];
                    for (Index k = rp[r]; k < rp[r + 1]; ++k) out[ci[k]] += va[k] * ur;
                }
            } else if constexpr (std::is_same_v<T, Ident>) {
                out += u;
            } else if constexpr (std::is_same_v<T, Diff>) {
                const Index n = output_dim_;
                out.segment(1, n) += u;
                out.segment(0, n) -= u;
            } else if constexpr (std::is_same_v<T, Select>) {
                const auto& idx = *impl.indices;
                for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] += u[static_cast<Index>(j)];
            } else {
                Index offset = 0;
                for (const auto& child : *impl.children) {
                    child.add_transpose_into(u.segment(offset, child.output_dim()), out);
                    offset += child.output_dim();
                }
            }
        },
        impl_);
}

Vector LinearOperator::apply(const Vector& x) const {
    if (x.size() != input_dim_) throw_dimension("LinearOperator::apply(" + describe() + ")", input_dim_, x.size());
    Vector out(output_dim_);
    apply_into(x, out);
    flops::add(flops::Bucket::Terms, apply_cost());
    return out;
}

Vector LinearOperator::apply_transpose(const Vector& u) const {
    Vector out = Vector::Zero(input_dim_);
    add_apply_transpose(u, out);
    return out;
}

void LinearOperator::add_apply_transpose(const Vector& u, Vector& out) const {
    if (u.size() != output_dim_) {
        throw_dimension("LinearOperator::apply_transpose(" + describe() + ")", output_dim_, u.size());
    }
    if (out.size() != input_dim_) {
        throw_dimension("LinearOperator::apply_transpose(" + describe() + ") output", input_dim_,
                        out.size());
    }
    add_transpose_into(u, out);
    flops::add(flops::Bucket::Terms, apply_cost());
}

NormEstimate LinearOperator::norm_estimate(int iterations, std::uint64_t seed) const {
    if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "norm_estimate: iterations < 1");
    if (input_dim_ == 0 || output_dim_ == 0) return {0.0, 0.0};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector v(input_dim_);
    for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v.normalize();

    // Lanczos on W^T W with full reorthogonalization. Ritz values never exceed
    // the largest eigenvalue, and the Ritz residual bounds the distance to it.
    const Index steps = std::min<Index>(iterations, input_dim_);
    std::vector<Vector> basis;
    std::vector<double> alpha, beta;
    basis.push_back(v);
    for (Index k = 0; k < steps; ++k) {
        Vector w = apply_transpose(apply(basis.back()));
        alpha.push_back(basis.back().dot(w));
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) w -= q.dot(w) * q;
        const double b = w.norm();
        if (k + 1 == steps || b <= 1e-14 * std::max(1.0, std::abs(alpha.front()))) {
            beta.push_back(b);
            break;
        }
        beta.push_back(b);
        basis.push_back(w / b);
    }

    const Index m = static_cast<Index>(alpha.size());
    DenseMatrix t = DenseMatrix::Zero(m, m);
    for (Index i = 0; i < m; ++i) {
        t(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(t);
    const double mu = eig.eigenvalues()(m - 1);
    if (!(mu > 0.0)) return {0.0, 0.0};
    const double residual = std::abs(beta.back() * eig.eigenvectors()(m - 1, m - 1));
    const double value = std::sqrt(mu);
    const double tol = std::sqrt(1.0 + residual / mu) - 1.0;
    return {value, tol};
}

std::string LinearOperator::describe() const {
    std::ostringstream os;
    os << to_string(kind()) << "[" << output_dim_ << "x" << input_dim_ << "]";
    return os.str();
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace sepqn
