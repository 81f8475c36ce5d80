#include "sepqn/problem.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <set>

#include "sepqn/error.hpp"

namespace sepqn {

const char* to_string(LossKind kind) {
    return kind == LossKind::Logistic ? "logistic" : "least-squares";
}

const char* to_string(NormKind kind) {
    switch (kind) {
        case NormKind::L1: return "l1";
        case NormKind::L2Group: return "l2";
        case NormKind::LInf: return "linf";
    }
    return "unknown";
}

std::vector<double> label_classes(const std::vector<double>& raw) {
    std::set<double> classes(raw.begin(), raw.end());
    return {classes.begin(), classes.end()};
}

std::vector<double> binary_labels(const std::vector<double>& raw) {
    const auto classes = label_classes(raw);
    std::vector<double> out(raw.size());
    if (classes.size() == 2) {
        for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] == classes[0] ? -1.0 : 1.0;
        return out;
    }
    if (classes.size() == 1) {
        const double c = classes[0];
        if (c == 1.0 || c == -1.0 || c == 0.0) {
            std::fill(out.begin(), out.end(), c == 1.0 ? 1.0 : -1.0);
            return out;
        }
    }
    throw Error(ErrorCode::InvalidArgument,
                "binary model needs two label classes, found " + std::to_string(classes.size()));
}

struct SmoothLoss::Cache {
    std::once_flag once;
    double lipschitz = 0.0;
};

SmoothLoss SmoothLoss::logistic(SparseMatrix data, std::vector<double> labels, Index tasks,
                                double ridge) {
    if (tasks < 1) throw Error(ErrorCode::InvalidArgument, "logistic loss: tasks < 1");
    if (data.rows() < 1) throw Error(ErrorCode::InvalidArgument, "logistic loss: no samples");
    if (static_cast<Index>(labels.size()) != data.rows() * tasks) {
        throw_dimension("logistic loss labels", data.rows() * tasks, static_cast<long>(labels.size()));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1.0 && labels[i] != -1.0) {
            throw Error(ErrorCode::InvalidArgument,
                        "logistic loss: label " + std::to_string(labels[i]) + " at position " +
                            std::to_string(i) + " is not in {-1, +1}");
        }
    }
    if (!(ridge >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge must be >= 0");
    SmoothLoss loss;
    loss.kind_ = LossKind::Logistic;
    loss.data_ = std::make_shared<const SparseMatrix>(std::move(data));
    loss.labels_ = std::make_shared<const std::vector<double>>(std::move(labels));
    loss.tasks_ = tasks;
    loss.ridge_ = ridge;
    loss.cache_ = std::make_shared<Cache>();
    return loss;
}

SmoothLoss SmoothLoss::least_squares(SparseMatrix data, std::vector<double> targets, double ridge) {
    if (data.rows() < 1) throw Error(ErrorCode::InvalidArgument, "least-squares loss: no samples");
    if (static_cast<Index>(targets.size()) != data.rows()) {
        throw_dimension("least-squares targets", data.rows(), static_cast<long>(targets.size()));
    }
    if (!(ridge >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge must be >= 0");
    SmoothLoss loss;
    loss.kind_ = LossKind::LeastSquares;
    loss.data_ = std::make_shared<const SparseMatrix>(std::move(data));
    loss.labels_ = std::make_shared<const std::vector<double>>(std::move(targets));
    loss.ridge_ = ridge;
    loss.cache_ = std::make_shared<Cache>();
    return loss;
}

namespace {

// log(1 + exp(z)) without overflow.
double log1pexp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// 1 / (1 + exp(-z))
double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

ValueGrad SmoothLoss::value_grad(const Vector& x, PassCounter* counter) const {
    if (x.size() != dimension()) throw_dimension("SmoothLoss::value_grad", dimension(), x.size());
    const auto& a = *data_;
    const auto& y = *labels_;
    const Index n = a.rows();
    const Index p = a.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    ValueGrad out{0.0, Vector(dimension())};

    if (kind_ == LossKind::Logistic) {
        for (Index t = 0; t < tasks_; ++t) {
            const Vector margins = a.multiply(x.segment(t * p, p));
            Vector weights(n);
            for (Index i = 0; i < n; ++i) {
                const double yi = y[static_cast<std::size_t>(t * n + i)];
                const double z = -yi * margins[i];
                out.value += log1pexp(z);
                weights[i] = -yi * sigmoid(z) * inv_n;
            }
            out.gradient.segment(t * p, p) = a.multiply_transpose(weights);
            flops::add(flops::Bucket::Data, 20 * static_cast<std::uint64_t>(n));
        }
        out.value *= inv_n;
    } else {
        Vector residual = a.multiply(x);
        for (Index i = 0; i < n; ++i) residual[i] -= y[static_cast<std::size_t>(i)];
        out.value = residual.squaredNorm() * inv_n;
        out.gradient = a.multiply_transpose(residual) * (2.0 * inv_n);
        flops::add(flops::Bucket::Data, 4 * static_cast<std::uint64_t>(n));
    }
    if (ridge_ > 0.0) {
        out.value += 0.5 * ridge_ * x.squaredNorm();
        out.gradient += ridge_ * x;
    }
    if (counter) ++counter->passes;
    return out;
}

double SmoothLoss::value(const Vector& x, PassCounter* counter) const {
    if (x.size() != dimension()) throw_dimension("SmoothLoss::value", dimension(), x.size());
    const auto& a = *data_;
    const auto& y = *labels_;
    const Index n = a.rows();
    const Index p = a.cols();
    double total = 0.0;
    if (kind_ == LossKind::Logistic) {
        for (Index t = 0; t < tasks_; ++t) {
            const Vector margins = a.multiply(x.segment(t * p, p));
            for (Index i = 0; i < n; ++i) {
                total += log1pexp(-y[static_cast<std::size_t>(t * n + i)] * margins[i]);
            }
            flops::add(flops::Bucket::Data, 10 * static_cast<std::uint64_t>(n));
        }
    } else {
        const Vector fitted = a.multiply(x);
        for (Index i = 0; i < n; ++i) {
            const double r = fitted[i] - y[static_cast<std::size_t>(i)];
            total += r * r;
        }
        flops::add(flops::Bucket::Data, 3 * static_cast<std::uint64_t>(n));
    }
    total /= static_cast<double>(n);
    if (ridge_ > 0.0) total += 0.5 * ridge_ * x.squaredNorm();
    if (counter) ++counter->passes;
    return total;
}

double SmoothLoss::lipschitz_bound() const {
    std::call_once(cache_->once, [this] {
        const auto& a = *data_;
        // Power iteration on A^T A. Whichever solve fills the cache first would
        // otherwise carry its cost, so it stays off the counters.
        const auto saved = flops::snapshot();
        Vector v = Vector::Ones(a.cols()).normalized();
        double mu = 0.0;
        double residual = 0.0;
        for (int it = 0; it < 100; ++it) {
            Vector w = a.multiply_transpose(a.multiply(v, flops::Bucket::Other), flops::Bucket::Other);
            mu = v.dot(w);
            residual = (w - mu * v).norm();
            const double wn = w.norm();
            if (wn == 0.0) break;
            v = w / wn;
        }
        const double norm_sq = (mu + residual) * 1.01;
        const double n = static_cast<double>(a.rows());
        const double scale = kind_ == LossKind::Logistic ? 0.25 / n : 2.0 / n;
        cache_->lipschitz = scale * norm_sq + ridge_;
        flops::restore(saved);
    });
    return cache_->lipschitz;
}

double norm_value(NormKind kind, const Vector& v) {
    if (v.size() == 0) return 0.0;
    switch (kind) {
        case NormKind::L1: return v.lpNorm<1>();
        case NormKind::L2Group: return v.norm();
        case NormKind::LInf: return v.lpNorm<Eigen::Infinity>();
    }
    return 0.0;
}

double dual_norm_value(NormKind kind, const Vector& v) {
    if (v.size() == 0) return 0.0;
    switch (kind) {
        case NormKind::L1: return v.lpNorm<Eigen::Infinity>();
        case NormKind::L2Group: return v.norm();
        case NormKind::LInf: return v.lpNorm<1>();
    }
    return 0.0;
}

namespace {

double structured_norm(const LinearOperator& op) {
    switch (op.kind()) {
        case OperatorKind::Identity:
        case OperatorKind::GroupSelector:
            return 1.0;
        case OperatorKind::FirstDifference: {
            const double p = static_cast<double>(op.input_dim());
            return 2.0 * std::sin((p - 1.0) * std::numbers::pi / (2.0 * p));
        }
        default: {
            const auto est = op.norm_estimate();
            return est.value * (1.0 + est.tolerance);
        }
    }
}

}  // namespace

RegularizerTerm::RegularizerTerm(NormKind norm_kind, double w, LinearOperator linear_op, Vector b)
    : norm(norm_kind), weight(w), op(std::move(linear_op)), offset(std::move(b)), op_norm(0.0) {
    if (!(weight > 0.0) || !std::isfinite(weight)) {
        throw Error(ErrorCode::InvalidArgument,
                    "regularizer weight must be positive and finite, got " + std::to_string(weight));
    }
    if (offset.size() == 0) offset = Vector::Zero(op.output_dim());
    if (offset.size() != op.output_dim()) {
        throw_dimension("regularizer offset for " + op.describe(), op.output_dim(), offset.size());
    }
    op_norm = structured_norm(op);
}

Vector RegularizerTerm::affine(const Vector& x) const {
    Vector u = op.apply(x);
    u += offset;
    return u;
}

double psi_value(const RegularizerTerm& term, const Vector& x) {
    return term.weight * norm_value(term.norm, term.affine(x));
}

CompositeProblem::CompositeProblem(SmoothLoss loss, std::vector<RegularizerTerm> terms)
    : loss_(std::move(loss)), terms_(std::move(terms)) {
    if (terms_.empty()) throw Error(ErrorCode::InvalidArgument, "problem needs at least one term");
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        if (terms_[i].op.input_dim() != loss_.dimension()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "term " + std::to_string(i) + " (" + terms_[i].op.describe() +
                            ") input dim differs from problem dimension " +
                            std::to_string(loss_.dimension()));
        }
    }
}

Index CompositeProblem::total_dual_dim() const {
    Index q = 0;
    for (const auto& t : terms_) q += t.output_dim();
    return q;
}

double psi_total(const CompositeProblem& problem, const Vector& x) {
    double total = 0.0;
    for (const auto& term : problem.terms()) total += psi_value(term, x);
    return total;
}

double objective(const CompositeProblem& problem, const Vector& x, PassCounter* counter) {
    if (x.size() != problem.dimension()) throw_dimension("objective", problem.dimension(), x.size());
    return problem.loss().value(x, counter) + psi_total(problem, x);
}

const std::vector<std::string>& builtin_model_names() {
    static const std::vector<std::string> names = {
        "l1-logistic", "fused-sparse-logistic", "sparse-group-logistic",
        "fused-sparse-group-logistic", "multitask-dirty-logistic"};
    return names;
}

namespace {

void require_positive(const char* model, const char* name, double value) {
    if (!(value > 0.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(model) + ": hyperparameter " + name + " must be positive");
    }
}

std::vector<std::vector<Index>> resolve_groups(const char* model, Index p, const ModelParams& params,
                                               bool allow_overlap) {
    std::vector<std::vector<Index>> groups = params.groups;
    if (groups.empty()) {
        if (params.group_size < 1) {
            throw Error(ErrorCode::InvalidArgument,
                        std::string(model) + ": needs explicit groups or group_size >= 1");
        }
        for (Index start = 0; start < p; start += params.group_size) {
            std::vector<Index> g;
            for (Index j = start; j < std::min(p, start + params.group_size); ++j) g.push_back(j);
            groups.push_back(std::move(g));
        }
    }
    if (!allow_overlap) {
        std::vector<char> seen(static_cast<std::size_t>(p), 0);
        for (const auto& g : groups) {
            for (Index j : g) {
                if (j < 0 || j >= p) {
                    throw Error(ErrorCode::InvalidArgument, std::string(model) + ": group index out of range");
                }
                if (seen[static_cast<std::size_t>(j)]++) {
                    throw Error(ErrorCode::InvalidArgument,
                                std::string(model) + ": groups overlap at feature " + std::to_string(j));
                }
            }
        }
    }
    return groups;
}

}  // namespace

CompositeProblem make_builtin(const std::string& model, const Dataset& data,
                              const ModelParams& params) {
    const Index p = data.dimension();
    const char* name = model.c_str();
    std::vector<RegularizerTerm> terms;

    if (model == "multitask-dirty-logistic") {
        require_positive(name, "lambda", params.lambda);
        require_positive(name, "gamma", params.gamma);
        const auto classes = label_classes(data.labels);
        const auto r = static_cast<Index>(classes.size());
        if (r < 2) throw Error(ErrorCode::InvalidArgument, "multitask model needs >= 2 classes");
        const Index n = data.samples();
        std::vector<double> labels(static_cast<std::size_t>(n * r));
        for (Index t = 0; t < r; ++t) {
            for (Index i = 0; i < n; ++i) {
                labels[static_cast<std::size_t>(t * n + i)] =
                    data.labels[static_cast<std::size_t>(i)] == classes[static_cast<std::size_t>(t)] ? 1.0 : -1.0;
            }
        }
        auto loss = SmoothLoss::logistic(data.features, std::move(labels), r, params.ridge);
        terms.emplace_back(NormKind::L1, params.lambda, LinearOperator::identity(p * r));
        for (Index j = 0; j < p; ++j) {
            std::vector<Index> row;
            for (Index t = 0; t < r; ++t) row.push_back(j + t * p);
            terms.emplace_back(NormKind::L2Group, params.gamma,
                               LinearOperator::group_selector(p * r, std::move(row)));
        }
        return CompositeProblem(std::move(loss), std::move(terms));
    }

    const auto classes = label_classes(data.labels);
    if (classes.size() > 2) {
        throw Error(ErrorCode::InvalidArgument,
                    model + ": multiclass labels are only supported by multitask-dirty-logistic");
    }
    auto loss = SmoothLoss::logistic(data.features, binary_labels(data.labels), 1, params.ridge);

    if (model == "l1-logistic") {
        require_positive(name, "lambda", params.lambda);
        terms.emplace_back(NormKind::L1, params.lambda, LinearOperator::identity(p));
    } else if (model == "fused-sparse-logistic") {
        require_positive(name, "lambda", params.lambda);
        require_positive(name, "fused", params.fused);
        terms.emplace_back(NormKind::L1, params.lambda, LinearOperator::identity(p));
        terms.emplace_back(NormKind::L1, params.fused, LinearOperator::first_difference(p));
    } else if (model == "sparse-group-logistic") {
        require_positive(name, "lambda", params.lambda);
        require_positive(name, "gamma", params.gamma);
        terms.emplace_back(NormKind::L1, params.lambda, LinearOperator::identity(p));
        for (auto& g : resolve_groups(name, p, params, false)) {
            terms.emplace_back(NormKind::L2Group, params.gamma, LinearOperator::group_selector(p, std::move(g)));
        }
    } else if (model == "fused-sparse-group-logistic") {
        require_positive(name, "lambda", params.lambda);
        require_positive(name, "fused", params.fused);
        require_positive(name, "gamma", params.gamma);
        terms.emplace_back(NormKind::L1, params.lambda, LinearOperator::identity(p));
        terms.emplace_back(NormKind::L1, params.fused, LinearOperator::first_difference(p));
        for (auto& g : resolve_groups(name, p, params, true)) {
            terms.emplace_back(NormKind::L2Group, params.gamma, LinearOperator::group_selector(p, std::move(g)));
        }
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown model '" + model + "'");
    }
    return CompositeProblem(std::move(loss), std::move(terms));
}

}  // namespace sepqn
