#include "kelfi/prior_embeddings.hpp"

#include "kelfi/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace kelfi {

namespace {

void require_dim(Eigen::Index got, std::size_t want, const char* what) {
    if (got != static_cast<Eigen::Index>(want)) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) + ", got " +
                             std::to_string(got));
    }
}

// Constants of the closed-form h that do not depend on the pair of points.
struct PairKernelConstants {
    Vector gamma_sq;
    Vector inv_two_s_sq_denom;  // 1 / (2 s^2 (2 + gamma^2)^2)
    double prefactor = 1.0;     // prod_d s_d / sigma_d
};

PairKernelConstants pair_constants(const GaussianPrior& prior, const LengthScales& beta) {
    require_dim(static_cast<Eigen::Index>(beta.size()), prior.dim(), "posterior_embedding_kernel scales");
    PairKernelConstants c;
    const auto dim = static_cast<Eigen::Index>(prior.dim());
    c.gamma_sq.resize(dim);
    c.inv_two_s_sq_denom.resize(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
        const double b = beta.values()[d];
        const double sigma = prior.stddev()[d];
        const double s_sq = 1.0 / (2.0 / (b * b) + 1.0 / (sigma * sigma));
        const double g = (b * b) / (sigma * sigma);
        c.gamma_sq[d] = g;
        c.inv_two_s_sq_denom[d] = 1.0 / (2.0 * s_sq * (2.0 + g) * (2.0 + g));
        c.prefactor *= std::sqrt(s_sq) / sigma;
    }
    return c;
}

// a_d - b_d^2 expanded as ((t - t*)^2 + gamma^2 ((t - mu)^2 + (t* - mu)^2)) / (2 + gamma^2)^2,
// which is non-negative term by term and free of cancellation.
double pair_kernel(const PairKernelConstants& c, const Vector& mean, const double* theta, const double* theta_star) {
    double exponent = 0.0;
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
        const double u = theta[d] - theta_star[d];
        const double p = theta[d] - mean[d];
        const double q = theta_star[d] - mean[d];
        exponent += (u * u + c.gamma_sq[d] * (p * p + q * q)) * c.inv_two_s_sq_denom[d];
    }
    return c.prefactor * std::exp(-exponent);
}

}  // namespace

GaussianPrior::GaussianPrior(Vector mean, Vector stddev) : mean_(std::move(mean)), stddev_(std::move(stddev)) {
    if (mean_.size() != stddev_.size()) {
        throw DimensionError("GaussianPrior: mean and stddev lengths differ");
    }
    if (mean_.size() == 0) {
        throw DomainError("GaussianPrior: empty");
    }
    for (Eigen::Index d = 0; d < stddev_.size(); ++d) {
        if (!(stddev_[d] > 0.0) || !std::isfinite(stddev_[d]) || !std::isfinite(mean_[d])) {
            throw DomainError("GaussianPrior: stddev must be positive and finite");
        }
    }
}

GaussianPrior GaussianPrior::standard(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return GaussianPrior(Vector::Zero(n), Vector::Ones(n));
}

double GaussianPrior::log_density(const PointRef& theta) const {
    require_dim(theta.size(), dim(), "GaussianPrior::density");
    const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double out = 0.0;
    for (Eigen::Index d = 0; d < mean_.size(); ++d) {
        const double z = (theta[d] - mean_[d]) / stddev_[d];
        out -= 0.5 * z * z + std::log(stddev_[d]) + half_log_two_pi;
    }
    return out;
}

double GaussianPrior::density(const PointRef& theta) const { return std::exp(log_density(theta)); }

PointSet GaussianPrior::sample(std::size_t count, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal;
    PointSet out(mean_.size(), static_cast<Eigen::Index>(count));
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        for (Eigen::Index d = 0; d < out.rows(); ++d) {
            out(d, j) = mean_[d] + stddev_[d] * normal(rng);
        }
    }
    return out;
}

PriorSampleSet::PriorSampleSet(PointSet samples, std::uint64_t seed) : samples_(std::move(samples)), seed_(seed) {
    if (samples_.cols() < 1) {
        throw DomainError("PriorSampleSet: needs at least one sample");
    }
}

PriorSampleSet PriorSampleSet::draw(const GaussianPrior& prior, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return PriorSampleSet(prior.sample(count, rng), seed);
}

ClosedFormTerms closed_form_terms(const PointRef& theta, const PointRef& theta_star, const GaussianPrior& prior,
                                  const LengthScales& beta) {
    require_dim(theta.size(), prior.dim(), "closed_form_terms");
    require_dim(theta_star.size(), prior.dim(), "closed_form_terms");
    require_dim(static_cast<Eigen::Index>(beta.size()), prior.dim(), "closed_form_terms scales");
    const auto dim = theta.size();
    ClosedFormTerms t{Vector(dim), Vector(dim), Vector(dim), Vector(dim), Vector(dim)};
    for (Eigen::Index d = 0; d < dim; ++d) {
        const double b = beta.values()[d];
        const double sigma = prior.stddev()[d];
        const double mu = prior.mean()[d];
        t.nu[d] = std::sqrt(b * b + sigma * sigma);
        t.gamma_sq[d] = (b * b) / (sigma * sigma);
        t.s[d] = 1.0 / std::sqrt(2.0 / (b * b) + 1.0 / (sigma * sigma));
        const double denom = 2.0 + t.gamma_sq[d];
        t.a[d] = (theta[d] * theta[d] + theta_star[d] * theta_star[d] + t.gamma_sq[d] * mu * mu) / denom;
        t.b[d] = (theta[d] + theta_star[d] + t.gamma_sq[d] * mu) / denom;
    }
    return t;
}

double prior_embedding(const PointRef& theta, const GaussianPrior& prior, const LengthScales& beta) {
    require_dim(theta.size(), prior.dim(), "prior_embedding");
    require_dim(static_cast<Eigen::Index>(beta.size()), prior.dim(), "prior_embedding scales");
    double exponent = 0.0;
    double ratio = 1.0;
    for (Eigen::Index d = 0; d < theta.size(); ++d) {
        const double b = beta.values()[d];
        const double sigma = prior.stddev()[d];
        const double nu_sq = b * b + sigma * sigma;
        const double diff = theta[d] - prior.mean()[d];
        exponent += diff * diff / nu_sq;
        ratio *= b / std::sqrt(nu_sq);
    }
    return std::exp(-0.5 * exponent) * ratio;
}

double prior_embedding(const PointRef& theta, const PriorSampleSet& samples, const LengthScales& beta) {
    require_dim(theta.size(), samples.dim(), "prior_embedding");
    PointSet query = theta;
    return gram(samples.samples(), query, beta).mean();
}

Vector prior_embedding_vector(const PointSet& thetas, const GaussianPrior& prior, const LengthScales& beta) {
    Vector out(thetas.cols());
    for (Eigen::Index j = 0; j < thetas.cols(); ++j) {
        out[j] = prior_embedding(thetas.col(j), prior, beta);
    }
    return out;
}

Vector prior_embedding_vector(const PointSet& thetas, const PriorSampleSet& samples, const LengthScales& beta) {
    require_dim(thetas.rows(), samples.dim(), "prior_embedding_vector");
    return gram(thetas, samples.samples(), beta).rowwise().mean();
}

double posterior_embedding_kernel(const PointRef& theta, const PointRef& theta_star, const GaussianPrior& prior,
                                  const LengthScales& beta) {
    require_dim(theta.size(), prior.dim(), "posterior_embedding_kernel");
    require_dim(theta_star.size(), prior.dim(), "posterior_embedding_kernel");
    const auto c = pair_constants(prior, beta);
    return pair_kernel(c, prior.mean(), theta.data(), theta_star.data());
}

double posterior_embedding_kernel(const PointRef& theta, const PointRef& theta_star, const PriorSampleSet& samples,
                                  const LengthScales& beta) {
    require_dim(theta.size(), samples.dim(), "posterior_embedding_kernel");
    require_dim(theta_star.size(), samples.dim(), "posterior_embedding_kernel");
    PointSet pair(theta.size(), 2);
    pair.col(0) = theta;
    pair.col(1) = theta_star;
    const Matrix k = gram(pair, samples.samples(), beta);
    return k.row(0).dot(k.row(1)) / static_cast<double>(samples.size());
}

Matrix posterior_embedding_matrix(const PointSet& thetas, const PointSet& candidates, const GaussianPrior& prior,
                                  const LengthScales& beta) {
    require_dim(thetas.rows(), prior.dim(), "posterior_embedding_matrix");
    require_dim(candidates.rows(), prior.dim(), "posterior_embedding_matrix candidates");
    const auto c = pair_constants(prior, beta);
    Matrix out(thetas.cols(), candidates.cols());
    for (Eigen::Index r = 0; r < candidates.cols(); ++r) {
        const double* star = candidates.col(r).data();
        for (Eigen::Index j = 0; j < thetas.cols(); ++j) {
            out(j, r) = pair_kernel(c, prior.mean(), thetas.col(j).data(), star);
        }
    }
    return out;
}

Matrix posterior_embedding_matrix(const PointSet& thetas, const PointSet& candidates, const PriorSampleSet& samples,
                                  const LengthScales& beta) {
    require_dim(thetas.rows(), samples.dim(), "posterior_embedding_matrix");
    require_dim(candidates.rows(), samples.dim(), "posterior_embedding_matrix candidates");
    const Matrix left = gram(thetas, samples.samples(), beta);
    const double inv_count = 1.0 / static_cast<double>(samples.size());
    Matrix out(thetas.cols(), candidates.cols());
    // Column blocks bound the T x block intermediate.
    constexpr Eigen::Index block = 256;
    for (Eigen::Index start = 0; start < candidates.cols(); start += block) {
        const Eigen::Index width = std::min(block, candidates.cols() - start);
        const Matrix right = gram(samples.samples(), candidates.middleCols(start, width), beta);
        out.middleCols(start, width).noalias() = inv_count * (left * right);
    }
    return out;
}

}  // namespace kelfi
