#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sepqn/dataset.hpp"
#include "sepqn/linalg.hpp"

namespace sepqn {

enum class LossKind { Logistic, LeastSquares };
enum class NormKind { L1, L2Group, LInf };

const char* to_string(LossKind kind);
const char* to_string(NormKind kind);

/// Counts full traversals of the training data.
struct PassCounter {
    std::size_t passes = 0;
};

struct ValueGrad {
    double value = 0.0;
    Vector gradient;
};

/// Smooth data-fitting term g(x), normalized by 1/n.
///
/// Logistic: (1/n) sum_t sum_i log(1 + exp(-y_it a_i^T x_t)) over r tasks that
/// share the design matrix; x stacks the task vectors (column-major p x r).
/// LeastSquares: (1/n) ||Ax - y||^2. Both accept an optional ridge term
/// (ridge/2) ||x||^2.
class SmoothLoss {
public:
    static SmoothLoss logistic(SparseMatrix data, std::vector<double> labels, Index tasks = 1,
                               double ridge = 0.0);
    static SmoothLoss least_squares(SparseMatrix data, std::vector<double> targets,
                                    double ridge = 0.0);

    LossKind kind() const { return kind_; }
    Index samples() const { return data_->rows(); }
    Index features() const { return data_->cols(); }
    Index tasks() const { return tasks_; }
    Index dimension() const { return data_->cols() * tasks_; }
    double ridge() const { return ridge_; }
    const SparseMatrix& data() const { return *data_; }
    const std::vector<double>& labels() const { return *labels_; }

    /// One data pass.
    ValueGrad value_grad(const Vector& x, PassCounter* counter = nullptr) const;
    /// One data pass.
    double value(const Vector& x, PassCounter* counter = nullptr) const;

    /// Upper estimate of the gradient Lipschitz constant:
    /// ||A||^2/(4n) (logistic) or 2||A||^2/n (least squares), plus ridge.
    double lipschitz_bound() const;

private:
    SmoothLoss() = default;

    struct Cache;

    LossKind kind_ = LossKind::Logistic;
    std::shared_ptr<const SparseMatrix> data_;
    std::shared_ptr<const std::vector<double>> labels_;
    Index tasks_ = 1;
    double ridge_ = 0.0;
    std::shared_ptr<Cache> cache_;
};

double norm_value(NormKind kind, const Vector& v);
/// The dual norm: L1 <-> LInf, L2 <-> L2.
double dual_norm_value(NormKind kind, const Vector& v);

/// psi(Wx + b) = weight * ||Wx + b||.
struct RegularizerTerm {
    RegularizerTerm(NormKind norm, double weight, LinearOperator op, Vector offset = Vector());

    NormKind norm;
    double weight;
    LinearOperator op;
    Vector offset;
    /// Upper estimate of ||W||_2 (exact for the structured kinds).
    double op_norm;

    Index output_dim() const { return op.output_dim(); }
    /// W x + b
    Vector affine(const Vector& x) const;
};

double psi_value(const RegularizerTerm& term, const Vector& x);

class CompositeProblem {
public:
    CompositeProblem(SmoothLoss loss, std::vector<RegularizerTerm> terms);

    const SmoothLoss& loss() const { return loss_; }
    const std::vector<RegularizerTerm>& terms() const { return terms_; }
    Index dimension() const { return loss_.dimension(); }
    std::size_t term_count() const { return terms_.size(); }
    Index total_dual_dim() const;

private:
    SmoothLoss loss_;
    std::vector<RegularizerTerm> terms_;
};

double psi_total(const CompositeProblem& problem, const Vector& x);

/// f(x) = g(x) + sum_i psi_i(W_i x + b_i). Costs one data pass.
double objective(const CompositeProblem& problem, const Vector& x, PassCounter* counter = nullptr);

struct ModelParams {
    double lambda = 0.0;  // l1 weight
    double fused = 0.0;   // total-variation weight
    double gamma = 0.0;   // group / row-group weight
    /// Contiguous groups of this size when `groups` is empty.
    Index group_size = 0;
    std::vector<std::vector<Index>> groups;
    double ridge = 0.0;
};

const std::vector<std::string>& builtin_model_names();

CompositeProblem make_builtin(const std::string& model, const Dataset& data,
                              const ModelParams& params);

}  // namespace sepqn
