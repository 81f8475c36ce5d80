#include "sepqn/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sepqn/error.hpp"

namespace sepqn {

LbfgsMetric::LbfgsMetric(Index dim, std::size_t memory, double sigma)
    : dim_(dim), memory_(memory), sigma_(1.0) {
    if (dim < 1) throw Error(ErrorCode::InvalidArgument, "LbfgsMetric: dim < 1");
    if (memory < 1) throw Error(ErrorCode::InvalidArgument, "LbfgsMetric: memory < 1");
    set_sigma(sigma);
}

void LbfgsMetric::set_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorCode::InvalidArgument, "LbfgsMetric: sigma must be positive and finite");
    }
    if (sigma < kSigmaFloor) {
        sigma = kSigmaFloor;
        ++floor_hits_;
    }
    sigma_ = sigma;
    rebuild();
}

void LbfgsMetric::clear() {
    pairs_.clear();
    beta_ = 2.0;
    rebuild();
}

bool LbfgsMetric::push_pair(const Vector& s, const Vector& y) {
    if (s.size() != dim_) throw_dimension("LbfgsMetric::push_pair s", dim_, s.size());
    if (y.size() != dim_) throw_dimension("LbfgsMetric::push_pair y", dim_, y.size());
    const double sy = s.dot(y);
    if (!(sy > 0.0) || !std::isfinite(sy)) return false;
    if (pairs_.size() == memory_) pairs_.pop_front();
    pairs_.push_back({s, y, sy});
    rebuild();
    return true;
}

void LbfgsMetric::rebuild() {
    const auto m = static_cast<Index>(pairs_.size());
    s_mat_.resize(dim_, m);
    y_mat_.resize(dim_, m);
    for (Index i = 0; i < m; ++i) {
        s_mat_.col(i) = pairs_[static_cast<std::size_t>(i)].s;
        y_mat_.col(i) = pairs_[static_cast<std::size_t>(i)].y;
    }
    if (m == 0) return;
    const DenseMatrix sy = s_mat_.transpose() * y_mat_;
    DenseMatrix middle = DenseMatrix::Zero(2 * m, 2 * m);
    middle.topLeftCorner(m, m) = sigma_ * (s_mat_.transpose() * s_mat_);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < i; ++j) {
            middle(i, m + j) = sy(i, j);
            middle(m + j, i) = sy(i, j);
        }
        middle(m + i, m + i) = -sy(i, i);
    }
    middle_.compute(middle);
    flops::add(flops::Bucket::Metric, 4 * static_cast<std::uint64_t>(m * dim_));
}

Vector LbfgsMetric::inv_apply(const Vector& v) const {
    if (v.size() != dim_) throw_dimension("LbfgsMetric::inv_apply", dim_, v.size());
    const std::size_t m = pairs_.size();
    std::vector<double> alpha(m);
    Vector q = v;
    for (std::size_t k = m; k-- > 0;) {
        const auto& pr = pairs_[k];
        alpha[k] = pr.s.dot(q) / pr.sy;
        q -= alpha[k] * pr.y;
    }
    q /= sigma_;
    for (std::size_t k = 0; k < m; ++k) {
        const auto& pr = pairs_[k];
        const double b = pr.y.dot(q) / pr.sy;
        q += (alpha[k] - b) * pr.s;
    }
    flops::add(flops::Bucket::Metric, (8 * m + 1) * static_cast<std::uint64_t>(dim_));
    return q;
}

Vector LbfgsMetric::apply(const Vector& v) const {
    if (v.size() != dim_) throw_dimension("LbfgsMetric::apply", dim_, v.size());
    const Index m = static_cast<Index>(pairs_.size());
    Vector out = sigma_ * v;
    if (m > 0) {
        Vector rhs(2 * m);
        rhs.head(m) = sigma_ * (s_mat_.transpose() * v);
        rhs.tail(m) = y_mat_.transpose() * v;
        const Vector coef = middle_.solve(rhs);
        out -= sigma_ * (s_mat_ * coef.head(m)) + y_mat_ * coef.tail(m);
    }
    flops::add(flops::Bucket::Metric, (8 * static_cast<std::uint64_t>(m) + 1) * static_cast<std::uint64_t>(dim_));
    return out;
}

void LbfgsMetric::adapt_h0(double step, const Vector& s, const Vector& y) {
    if (!(step > 0.0 && step <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "adapt_h0: step must lie in (0, 1]");
    }
    const double ys = y.dot(s);
    if (!(ys > 0.0)) throw Error(ErrorCode::InvalidArgument, "adapt_h0: requires s^T y > 0");
    double sigma = sigma_;
    if (step < 1.0) {
        sigma /= step;
        beta_ = 2.0 / (1.0 + 1.0 / beta_);
    }
    sigma = std::min(sigma / beta_, y.squaredNorm() / ys);
    set_sigma(sigma);
}

double LbfgsMetric::inv_norm_estimate(int iterations) const {
    if (pairs_.empty()) return 1.0 / sigma_;
    Vector v = Vector::Ones(dim_).normalized();
    double mu = 1.0 / sigma_;
    for (int it = 0; it < iterations; ++it) {
        Vector w = inv_apply(v);
        mu = v.dot(w);
        const double wn = w.norm();
        if (wn == 0.0) break;
        v = w / wn;
    }
    return std::max(mu, 1.0 / sigma_);
}

DenseMatrix LbfgsMetric::materialize_dense() const {
    if (static_cast<std::size_t>(dim_) > kDenseLimit) {
        throw Error(ErrorCode::InvalidArgument,
                    "materialize_dense: dimension " + std::to_string(dim_) + " exceeds limit " +
                        std::to_string(kDenseLimit));
    }
    DenseMatrix h(dim_, dim_);
    for (Index j = 0; j < dim_; ++j) h.col(j) = apply(Vector::Unit(dim_, j));
    return h;
}

DenseMatrix LbfgsMetric::materialize_inverse_dense() const {
    if (static_cast<std::size_t>(dim_) > kDenseLimit) {
        throw Error(ErrorCode::InvalidArgument,
                    "materialize_inverse_dense: dimension " + std::to_string(dim_) +
                        " exceeds limit " + std::to_string(kDenseLimit));
    }
    DenseMatrix h(dim_, dim_);
    for (Index j = 0; j < dim_; ++j) h.col(j) = inv_apply(Vector::Unit(dim_, j));
    return h;
}

}  // namespace sepqn
