#include "sepqn/dual_cones.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sepqn/error.hpp"

namespace sepqn {

DualBlock DualBlock::zeros(const RegularizerTerm& term) {
    return {Vector::Zero(term.output_dim()), term.weight, term.norm};
}

Vector project_l1_ball(const Vector& v, double radius) {
    if (v.lpNorm<1>() <= radius) return v;
    std::vector<double> mags(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(v[i]);
    std::sort(mags.begin(), mags.end(), std::greater<>());
    // Largest k with mags[k] > (sum_{j<=k} mags[j] - radius) / (k + 1).
    double cumulative = 0.0;
    double threshold = 0.0;
    for (std::size_t k = 0; k < mags.size(); ++k) {
        cumulative += mags[k];
        const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
        if (mags[k] > candidate) threshold = candidate;
        else break;
    }
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double mag = std::max(std::abs(v[i]) - threshold, 0.0);
        out[i] = std::copysign(mag, v[i]);
    }
    flops::add(flops::Bucket::Terms, 4 * static_cast<std::uint64_t>(v.size()));
    return out;
}

Vector project_dual_ball(NormKind norm, double radius, const Vector& v) {
    switch (norm) {
        case NormKind::L1:
            flops::add(flops::Bucket::Terms, static_cast<std::uint64_t>(v.size()));
            return v.cwiseMax(-radius).cwiseMin(radius);
        case NormKind::L2Group: {
            flops::add(flops::Bucket::Terms, 3 * static_cast<std::uint64_t>(v.size()));
            const double nv = v.norm();
            return nv <= radius ? v : Vector(v * (radius / nv));
        }
        case NormKind::LInf:
            return project_l1_ball(v, radius);
    }
    return v;
}

DualBlock dual_step(const DualBlock& block, const Vector& gradient, double step) {
    if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "dual_step: step must be positive");
    if (gradient.size() != block.z.size()) {
        throw_dimension("dual_step gradient", block.z.size(), gradient.size());
    }
    return {project_dual_ball(block.norm, block.weight, block.z - step * gradient), block.weight,
            block.norm};
}

bool dual_feasible(const DualBlock& block, double tolerance) {
    return dual_norm_value(block.norm, block.z) <= block.weight + tolerance;
}

double fenchel_gap(NormKind norm, double weight, const Vector& z, const Vector& u) {
    flops::add(flops::Bucket::Terms, 3 * static_cast<std::uint64_t>(u.size()));
    if (norm == NormKind::L1) {
        // Summed per coordinate; each summand is nonnegative for feasible z.
        double gap = 0.0;
        for (Index j = 0; j < u.size(); ++j) gap += weight * std::abs(u[j]) - z[j] * u[j];
        return gap;
    }
    return weight * norm_value(norm, u) - z.dot(u);
}

double dual_to_psi_certificate(const RegularizerTerm& term, const Vector& z, const Vector& x) {
    if (z.size() != term.output_dim()) throw_dimension("certificate dual", term.output_dim(), z.size());
    const DualBlock block{z, term.weight, term.norm};
    if (!dual_feasible(block, 1e-9 * std::max(1.0, term.weight))) {
        throw Error(ErrorCode::InvalidArgument, "certificate: dual point is infeasible");
    }
    return fenchel_gap(term.norm, term.weight, z, term.affine(x));
}

Vector prox_norm(NormKind norm, double threshold, const Vector& v) {
    switch (norm) {
        case NormKind::L1: {
            Vector out(v.size());
            for (Index i = 0; i < v.size(); ++i) {
                out[i] = std::copysign(std::max(std::abs(v[i]) - threshold, 0.0), v[i]);
            }
            return out;
        }
        case NormKind::L2Group: {
            const double nv = v.norm();
            if (nv <= threshold) return Vector::Zero(v.size());
            return v * (1.0 - threshold / nv);
        }
        case NormKind::LInf:
            // Moreau decomposition.
            return v - project_l1_ball(v, threshold);
    }
    return v;
}

}  // namespace sepqn
