#pragma once

#include "kelfi/kernels.hpp"
#include "kelfi/prior_embeddings.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>

namespace kelfi {

/// Paired simulation parameters and summaries {theta_j, x_j}, one pair per column.
class SimulationSet {
public:
    SimulationSet(PointSet thetas, PointSet summaries, std::string proposal_tag = "prior");

    const PointSet& thetas() const { return thetas_; }
    const PointSet& summaries() const { return summaries_; }
    const std::string& proposal_tag() const { return proposal_tag_; }

    std::size_t size() const { return static_cast<std::size_t>(thetas_.cols()); }
    std::size_t param_dim() const { return static_cast<std::size_t>(thetas_.rows()); }
    std::size_t summary_dim() const { return static_cast<std::size_t>(summaries_.rows()); }

    /// The first `count` pairs.
    SimulationSet prefix(std::size_t count) const;

private:
    PointSet thetas_;
    PointSet summaries_;
    std::string proposal_tag_;
};

/// Kernel and regularization hyperparameters of the surrogate.
///
/// With `tie_beta`, beta = beta0 * sigma (prior stddev). With `tie_lambda`,
/// lambda = 1e-3 * beta0.
struct Hyperparameters {
    LengthScales eps;
    double beta0;
    LengthScales beta;
    double lambda;
    bool tie_beta;
    bool tie_lambda;

    static constexpr double lambda_ratio = 1e-3;

    static Hyperparameters tied(LengthScales eps, double beta0, const Vector& prior_stddev);
    static Hyperparameters untied(LengthScales eps, LengthScales beta, double lambda);

    /// Same ties, new (eps, beta0).
    Hyperparameters with_scales(LengthScales new_eps, double new_beta0, const Vector& prior_stddev) const;
};

/// A prior known only through fixed draws, with an optional density for KMP queries.
struct SampledPrior {
    std::shared_ptr<const PriorSampleSet> samples;
    std::function<double(const PointRef&)> density;
};

using Prior = std::variant<GaussianPrior, SampledPrior>;

SampledPrior sampled_from(const GaussianPrior& prior, std::size_t count, std::uint64_t seed);

std::size_t prior_dim(const Prior& prior);

/// Prior standard deviations; estimated from the draws for a sampled prior.
Vector prior_stddev(const Prior& prior);

/// The part of a fit that depends only on (simulation parameters, beta, lambda,
/// prior): the factorization of L + m*lambda*I and the cached prior embeddings.
/// Reused across every epsilon and observation.
class FactorizedKernel {
public:
    FactorizedKernel(std::shared_ptr<const SimulationSet> sims, const LengthScales& beta, double lambda,
                     Prior prior);

    const SimulationSet& sims() const { return *sims_; }
    std::shared_ptr<const SimulationSet> sims_ptr() const { return sims_; }
    const LengthScales& beta() const { return beta_; }
    const Prior& prior() const { return prior_; }
    const RegularizedCholesky& cholesky() const { return *chol_; }
    const Vector& prior_embeddings() const { return prior_embed_; }

    /// Weights v = (L + m*lambda*I)^{-1} kappa.
    Vector weights(const Vector& kappa) const { return chol_->solve(kappa); }

    /// q(y) = v . mu_Theta for an epsilon-kernel vector, without building a state.
    double mkml(const Vector& kappa) const { return weights(kappa).dot(prior_embed_); }

private:
    std::shared_ptr<const SimulationSet> sims_;
    LengthScales beta_;
    Prior prior_;
    std::shared_ptr<const RegularizedCholesky> chol_;
    Vector prior_embed_;
};

/// Fitted surrogate: KML, MKML, KMP and KMPE queries for one observation.
/// Immutable after construction.
class SurrogateState {
public:
    SurrogateState(std::shared_ptr<const FactorizedKernel> factor, Vector observed, Hyperparameters hyper,
                   Vector kappa);

    const SimulationSet& sims() const { return factor_->sims(); }
    const Hyperparameters& hyper() const { return hyper_; }
    const Prior& prior() const { return factor_->prior(); }
    const FactorizedKernel& factor() const { return *factor_; }
    const Vector& observed() const { return observed_; }
    const Vector& kappa() const { return kappa_; }
    const Vector& weights() const { return v_; }
    const Vector& prior_embeddings() const { return factor_->prior_embeddings(); }
    std::size_t param_dim() const { return sims().param_dim(); }

    /// Max-abs residual of (L + m*lambda*I) v - kappa.
    double solve_residual() const;

    /// q(y|theta) = sum_j v_j l(theta_j, theta); not clipped.
    double kml(const PointRef& theta) const;
    Vector kml_many(const PointSet& thetas) const;

    /// q(y) = v . mu_Theta.
    double mkml() const { return mkml_; }

    /// True when q(y) > 0 and posterior queries are allowed.
    bool posterior_defined() const { return mkml_ > 0.0; }
    std::string diagnostic() const;

    /// q(theta|y) = q(y|theta) p(theta) / q(y).
    double kmp(const PointRef& theta) const;

    /// (1/q(y)) sum_j v_j h(theta_j, theta*).
    double kmpe(const PointRef& theta_star, const EmbeddingMode& mode) const;

    /// Batched KMPE over candidate columns: H^T v / q(y).
    Vector kmpe_many(const PointSet& candidates, const EmbeddingMode& mode) const;

private:
    void require_posterior() const;

    std::shared_ptr<const FactorizedKernel> factor_;
    Vector observed_;
    Hyperparameters hyper_;
    Vector kappa_;
    Vector v_;
    double mkml_;
};

/// Fit with pointwise Gaussian epsilon-kernel on summaries.
SurrogateState fit(std::shared_ptr<const SimulationSet> sims, const Vector& observed, const Hyperparameters& hyper,
                   const Prior& prior);
SurrogateState fit(const SimulationSet& sims, const Vector& observed, const Hyperparameters& hyper,
                   const Prior& prior);

/// Multi-start gradient ascent on the KMP from the given starting columns.
/// Steps are only accepted when they increase the KMP.
Vector kmp_mode(const SurrogateState& state, const PointSet& starts);

/// As above, starting from `restarts` prior draws.
Vector kmp_mode(const SurrogateState& state, std::size_t restarts, std::uint64_t seed);

}  // namespace kelfi
