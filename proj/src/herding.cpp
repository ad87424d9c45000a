#include "kelfi/herding.hpp"

#include "kelfi/errors.hpp"

#include <cmath>
#include <random>

namespace kelfi {

CandidateSet::CandidateSet(PointSet points_, CandidateOrigin origin_, std::uint64_t seed_)
    : points(std::move(points_)), origin(origin_), seed(seed_) {
    if (points.cols() < 1 || points.rows() < 1) {
        throw DomainError("CandidateSet: needs at least one candidate");
    }
}

SuperSampleSet herd(const Vector& embedding_values, const CandidateSet& candidates, const LengthScales& beta,
                    std::size_t count) {
    const Eigen::Index r_count = candidates.points.cols();
    if (embedding_values.size() != r_count) {
        throw DimensionError("herd: one embedding value per candidate required");
    }
    if (candidates.points.rows() != static_cast<Eigen::Index>(beta.size())) {
        throw DimensionError("herd: candidate dimension does not match scales");
    }
    if (count < 1) {
        throw DomainError("herd: sample count must be at least 1");
    }

    const Vector inv = beta.values().cwiseInverse();
    const PointSet scaled = inv.asDiagonal() * candidates.points;

    SuperSampleSet out;
    out.samples.resize(candidates.points.rows(), static_cast<Eigen::Index>(count));
    out.indices.reserve(count);
    out.objective_trace.resize(static_cast<Eigen::Index>(count));
    Vector a = Vector::Zero(r_count);

    for (std::size_t step = 0; step < count; ++step) {
        const double s = static_cast<double>(step + 1);
        Eigen::Index best = 0;
        double best_value = embedding_values[0] - a[0] / s;
        for (Eigen::Index r = 1; r < r_count; ++r) {
            const double value = embedding_values[r] - a[r] / s;
            if (value > best_value) {
                best_value = value;
                best = r;
            }
        }
        const auto k = static_cast<Eigen::Index>(step);
        out.indices.push_back(best);
        out.samples.col(k) = candidates.points.col(best);
        out.objective_trace[k] = best_value;
        for (Eigen::Index r = 0; r < r_count; ++r) {
            a[r] += std::exp(-0.5 * (scaled.col(r) - scaled.col(best)).squaredNorm());
        }
    }
    out.kernel_sum = std::move(a);
    return out;
}

CandidateSet candidates_from_prior(const GaussianPrior& prior, std::size_t count, std::uint64_t seed) {
    if (count < 1) {
        throw DomainError("candidates_from_prior: count must be at least 1");
    }
    std::mt19937_64 rng(seed);
    PointSet points = prior.sample(count, rng);
    const Vector lo = prior.mean() - 8.0 * prior.stddev();
    const Vector hi = prior.mean() + 8.0 * prior.stddev();
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        points.col(j) = points.col(j).cwiseMax(lo).cwiseMin(hi);
    }
    return CandidateSet(std::move(points), CandidateOrigin::prior_samples, seed);
}

Vector herding_mmd(const PointSet& samples, const Vector& embedding_at_samples, const LengthScales& beta) {
    if (samples.cols() != embedding_at_samples.size()) {
        throw DimensionError("herding_mmd: one embedding value per sample required");
    }
    const Matrix k = gram(samples, samples, beta);
    Vector out(samples.cols());
    double pair_sum = 0.0;
    double embed_sum = 0.0;
    for (Eigen::Index s = 0; s < samples.cols(); ++s) {
        pair_sum += k(s, s) + 2.0 * k.col(s).head(s).sum();
        embed_sum += embedding_at_samples[s];
        const double n = static_cast<double>(s + 1);
        out[s] = pair_sum / (n * n) - 2.0 * embed_sum / n;
    }
    return out;
}

Vector herding_mmd(const SuperSampleSet& samples, const SurrogateState& state, const EmbeddingMode& mode) {
    return herding_mmd(samples.samples, state.kmpe_many(samples.samples, mode), state.hyper().beta);
}

}  // namespace kelfi
