#pragma once

#include "kelfi/kernels.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <variant>

namespace kelfi {

/// Anisotropic Gaussian prior prod_d N(theta_d | mean_d, stddev_d^2).
class GaussianPrior {
public:
    GaussianPrior(Vector mean, Vector stddev);

    static GaussianPrior standard(std::size_t dim);

    const Vector& mean() const { return mean_; }
    const Vector& stddev() const { return stddev_; }
    std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }

    double density(const PointRef& theta) const;
    double log_density(const PointRef& theta) const;

    /// `count` draws, one per column.
    PointSet sample(std::size_t count, std::mt19937_64& rng) const;

private:
    Vector mean_;
    Vector stddev_;
};

/// Fixed prior draws used by every Monte-Carlo embedding in one fit.
class PriorSampleSet {
public:
    PriorSampleSet(PointSet samples, std::uint64_t seed);

    static PriorSampleSet draw(const GaussianPrior& prior, std::size_t count, std::uint64_t seed);

    const PointSet& samples() const { return samples_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t size() const { return static_cast<std::size_t>(samples_.cols()); }
    std::size_t dim() const { return static_cast<std::size_t>(samples_.rows()); }

private:
    PointSet samples_;
    std::uint64_t seed_;
};

struct ClosedFormEmbedding {};

struct MonteCarloEmbedding {
    std::shared_ptr<const PriorSampleSet> samples;
};

/// How mu_Theta and h are evaluated: closed forms under a Gaussian prior, or
/// averages over fixed prior samples.
using EmbeddingMode = std::variant<ClosedFormEmbedding, MonteCarloEmbedding>;

/// Per-dimension quantities shared by the closed-form prior embedding and
/// posterior-embedding kernel. `a` and `b` depend on the pair (theta, theta_star).
struct ClosedFormTerms {
    Vector nu;        // sqrt(beta^2 + sigma^2)
    Vector gamma_sq;  // beta^2 / sigma^2
    Vector s;         // s^-2 = 2 beta^-2 + sigma^-2
    Vector a;
    Vector b;
};

ClosedFormTerms closed_form_terms(const PointRef& theta, const PointRef& theta_star, const GaussianPrior& prior,
                                  const LengthScales& beta);

/// mu_Theta(theta) = l_nu(theta, mu) * prod_d beta_d / nu_d.
double prior_embedding(const PointRef& theta, const GaussianPrior& prior, const LengthScales& beta);

/// (1/T) sum_t l_beta(theta_t, theta).
double prior_embedding(const PointRef& theta, const PriorSampleSet& samples, const LengthScales& beta);

/// {mu_Theta(theta_j)} over the columns of `thetas`.
Vector prior_embedding_vector(const PointSet& thetas, const GaussianPrior& prior, const LengthScales& beta);
Vector prior_embedding_vector(const PointSet& thetas, const PriorSampleSet& samples, const LengthScales& beta);

/// h(theta, theta*) = int l(theta, t) l(t, theta*) p(t) dt under a Gaussian prior.
double posterior_embedding_kernel(const PointRef& theta, const PointRef& theta_star, const GaussianPrior& prior,
                                  const LengthScales& beta);

/// (1/T) sum_t l(theta, t_t) l(t_t, theta*).
double posterior_embedding_kernel(const PointRef& theta, const PointRef& theta_star, const PriorSampleSet& samples,
                                  const LengthScales& beta);

/// H = {h(theta_j, theta*_r)}, an m x R matrix.
Matrix posterior_embedding_matrix(const PointSet& thetas, const PointSet& candidates, const GaussianPrior& prior,
                                  const LengthScales& beta);
Matrix posterior_embedding_matrix(const PointSet& thetas, const PointSet& candidates, const PriorSampleSet& samples,
                                  const LengthScales& beta);

}  // namespace kelfi
