#pragma once

#include "kelfi/surrogate.hpp"

#include <cstdint>
#include <vector>

namespace kelfi {

enum class CandidateOrigin { prior_samples, grid, user };

/// Finite set of query parameters {theta*_r}, one per column.
struct CandidateSet {
    CandidateSet(PointSet points, CandidateOrigin origin, std::uint64_t seed = 0);

    PointSet points;
    CandidateOrigin origin;
    std::uint64_t seed;

    std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
};

/// Herded super-samples. Samples may repeat; every sample is a candidate.
struct SuperSampleSet {
    PointSet samples;
    std::vector<Eigen::Index> indices;  // candidate index of each sample
    Vector objective_trace;             // mu_r* - a_r*/s at each step
    Vector kernel_sum;                  // final accumulator a

    std::size_t size() const { return indices.size(); }
};

/// Kernel herding over a candidate set: at step s pick
/// r* = argmax_r mu_r - a_r / s (lowest index on ties), then a_r += l(theta*_r, theta*_{r*}).
SuperSampleSet herd(const Vector& embedding_values, const CandidateSet& candidates, const LengthScales& beta,
                    std::size_t count);

/// R independent prior draws, clamped to mean +/- 8 stddev.
CandidateSet candidates_from_prior(const GaussianPrior& prior, std::size_t count, std::uint64_t seed);

/// For each prefix size s = 1..S, the part of ||(1/s) sum_i l(theta_i, .) - mu~||^2
/// that does not depend on the samples' target norm:
/// (1/s^2) sum_ij l(theta_i, theta_j) - (2/s) sum_i mu~(theta_i).
Vector herding_mmd(const SuperSampleSet& samples, const SurrogateState& state, const EmbeddingMode& mode);

/// Same quantity from precomputed KMPE values at the samples.
Vector herding_mmd(const PointSet& samples, const Vector& embedding_at_samples, const LengthScales& beta);

}  // namespace kelfi
