#pragma once

#include <cstddef>
#include <deque>

#include <Eigen/LU>

#include "sepqn/linalg.hpp"

namespace sepqn {

/// Limited-memory BFGS approximation H_k of the Hessian of the smooth loss,
/// seeded with H_0 = sigma * I.
///
/// `inv_apply` uses the two-loop recursion; `apply` uses the compact
/// representation
///   H = sigma I - [sigma S, Y] [[sigma S^T S, L], [L^T, -D]]^{-1} [sigma S^T; Y^T]
/// so both cost O(M p). The compact factors are rebuilt whenever the history
/// or sigma changes, so read-only calls are safe to share between threads.
class LbfgsMetric {
public:
    static constexpr double kSigmaFloor = 1e-8;
    static constexpr std::size_t kDenseLimit = 512;

    explicit LbfgsMetric(Index dim, std::size_t memory = 10, double sigma = 1.0);

    Index dim() const { return dim_; }
    std::size_t memory() const { return memory_; }
    std::size_t pair_count() const { return pairs_.size(); }
    double sigma() const { return sigma_; }
    double beta() const { return beta_; }
    /// Number of times sigma was clamped to kSigmaFloor.
    std::size_t floor_hits() const { return floor_hits_; }

    void set_sigma(double sigma);
    void clear();

    /// Appends (s, y) iff s^T y > 0, evicting the oldest pair beyond capacity.
    bool push_pair(const Vector& s, const Vector& y);

    /// H_k^{-1} v
    Vector inv_apply(const Vector& v) const;
    /// H_k v
    Vector apply(const Vector& v) const;

    /// Adaptive initial Hessian. Requires s^T y > 0 and t in (0, 1]:
    ///   if t < 1: sigma <- sigma / t, beta <- 2 / (1 + 1/beta)
    ///   sigma <- min(sigma / beta, y^T y / y^T s)
    void adapt_h0(double step, const Vector& s, const Vector& y);

    /// Power-iteration estimate of ||H_k^{-1}||_2 (exact with empty history).
    double inv_norm_estimate(int iterations = 30) const;

    /// Dense H_k built column by column from `apply`; dim must be <= kDenseLimit.
    DenseMatrix materialize_dense() const;
    DenseMatrix materialize_inverse_dense() const;

    /// Stored pairs, oldest first.
    const Vector& s_at(std::size_t i) const { return pairs_[i].s; }
    const Vector& y_at(std::size_t i) const { return pairs_[i].y; }

private:
    struct Pair {
        Vector s;
        Vector y;
        double sy;
    };

    void rebuild();

    Index dim_;
    std::size_t memory_;
    double sigma_;
    double beta_ = 2.0;
    std::size_t floor_hits_ = 0;
    std::deque<Pair> pairs_;

    // Compact representation cache.
    DenseMatrix s_mat_;
    DenseMatrix y_mat_;
    Eigen::PartialPivLU<DenseMatrix> middle_;
};

}  // namespace sepqn
