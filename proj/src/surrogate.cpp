#include "kelfi/surrogate.hpp"

#include "kelfi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace kelfi {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Vector prior_stddev(const Prior& prior) {
    return std::visit(Overloaded{[](const GaussianPrior& g) -> Vector { return g.stddev(); },
                                 [](const SampledPrior& s) -> Vector {
                                     const PointSet& x = s.samples->samples();
                                     const Vector mean = x.rowwise().mean();
                                     const Vector var = (x.colwise() - mean).array().square().rowwise().mean();
                                     return var.cwiseSqrt().cwiseMax(1e-12);
                                 }},
                      prior);
}

SimulationSet::SimulationSet(PointSet thetas, PointSet summaries, std::string proposal_tag)
    : thetas_(std::move(thetas)), summaries_(std::move(summaries)), proposal_tag_(std::move(proposal_tag)) {
    if (thetas_.cols() != summaries_.cols()) {
        throw DimensionError("SimulationSet: parameter and summary counts differ");
    }
    if (thetas_.cols() < 1) {
        throw DomainError("SimulationSet: needs at least one simulation");
    }
    if (!thetas_.allFinite() || !summaries_.allFinite()) {
        throw DomainError("SimulationSet: non-finite entries");
    }
}

SimulationSet SimulationSet::prefix(std::size_t count) const {
    if (count < 1 || count > size()) {
        throw DomainError("SimulationSet::prefix: count out of range");
    }
    const auto n = static_cast<Eigen::Index>(count);
    return SimulationSet(thetas_.leftCols(n), summaries_.leftCols(n), proposal_tag_);
}

Hyperparameters Hyperparameters::tied(LengthScales eps, double beta0, const Vector& prior_stddev) {
    if (!(beta0 > 0.0) || !std::isfinite(beta0)) {
        throw DomainError("Hyperparameters: beta0 must be positive and finite");
    }
    return Hyperparameters{std::move(eps), beta0, LengthScales(beta0 * prior_stddev), lambda_ratio * beta0, true,
                           true};
}

Hyperparameters Hyperparameters::untied(LengthScales eps, LengthScales beta, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw DomainError("Hyperparameters: lambda must be positive and finite");
    }
    return Hyperparameters{std::move(eps), 1.0, std::move(beta), lambda, false, false};
}

Hyperparameters Hyperparameters::with_scales(LengthScales new_eps, double new_beta0, const Vector& prior_stddev) const {
    Hyperparameters out = *this;
    out.eps = std::move(new_eps);
    out.beta0 = new_beta0;
    if (tie_beta) {
        out.beta = LengthScales(new_beta0 * prior_stddev);
    }
    if (tie_lambda) {
        out.lambda = lambda_ratio * new_beta0;
    }
    return out;
}

SampledPrior sampled_from(const GaussianPrior& prior, std::size_t count, std::uint64_t seed) {
    return SampledPrior{std::make_shared<const PriorSampleSet>(PriorSampleSet::draw(prior, count, seed)),
                        [prior](const PointRef& theta) { return prior.density(theta); }};
}

std::size_t prior_dim(const Prior& prior) {
    return std::visit(Overloaded{[](const GaussianPrior& g) { return g.dim(); },
                                 [](const SampledPrior& s) { return s.samples->dim(); }},
                      prior);
}

FactorizedKernel::FactorizedKernel(std::shared_ptr<const SimulationSet> sims, const LengthScales& beta, double lambda,
                                   Prior prior)
    : sims_(std::move(sims)), beta_(beta), prior_(std::move(prior)) {
    if (prior_dim(prior_) != sims_->param_dim() || beta_.size() != sims_->param_dim()) {
        throw DimensionError("FactorizedKernel: prior, scales and parameters disagree in dimension");
    }
    chol_ = std::make_shared<const RegularizedCholesky>(gram(sims_->thetas(), beta_), lambda);
    prior_embed_ = std::visit(
        Overloaded{[&](const GaussianPrior& g) { return prior_embedding_vector(sims_->thetas(), g, beta_); },
                   [&](const SampledPrior& s) { return prior_embedding_vector(sims_->thetas(), *s.samples, beta_); }},
        prior_);
}

SurrogateState::SurrogateState(std::shared_ptr<const FactorizedKernel> factor, Vector observed, Hyperparameters hyper,
                               Vector kappa)
    : factor_(std::move(factor)), observed_(std::move(observed)), hyper_(std::move(hyper)), kappa_(std::move(kappa)) {
    if (!(factor_->beta() == hyper_.beta) || factor_->cholesky().lambda() != hyper_.lambda) {
        throw DomainError("SurrogateState: factorization was built for different (beta, lambda)");
    }
    v_ = factor_->weights(kappa_);
    mkml_ = v_.dot(factor_->prior_embeddings());
}

double SurrogateState::solve_residual() const {
    Matrix system = gram(sims().thetas(), hyper_.beta).entries();
    system.diagonal().array() += static_cast<double>(sims().size()) * hyper_.lambda;
    return (system * v_ - kappa_).cwiseAbs().maxCoeff();
}

double SurrogateState::kml(const PointRef& theta) const {
    if (theta.size() != static_cast<Eigen::Index>(param_dim())) {
        throw DimensionError("kml: parameter dimension mismatch");
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < v_.size(); ++j) {
        sum += v_[j] * ard_gaussian(sims().thetas().col(j), theta, hyper_.beta);
    }
    return sum;
}

Vector SurrogateState::kml_many(const PointSet& thetas) const {
    return gram(thetas, sims().thetas(), hyper_.beta) * v_;
}

std::string SurrogateState::diagnostic() const {
    std::ostringstream out;
    if (posterior_defined()) {
        out << "q(y) = " << mkml_ << " > 0";
        return out.str();
    }
    out << "marginal surrogate likelihood q(y) = " << mkml_
        << " is not positive; the simulator cannot reproduce the observation at the current epsilon scale "
           "(posterior queries refused)";
    return out.str();
}

void SurrogateState::require_posterior() const {
    if (!posterior_defined()) {
        throw RefusalError(diagnostic());
    }
}

double SurrogateState::kmp(const PointRef& theta) const {
    require_posterior();
    const double density = std::visit(Overloaded{[&](const GaussianPrior& g) { return g.density(theta); },
                                                 [&](const SampledPrior& s) {
                                                     if (!s.density) {
                                                         throw DomainError("kmp: sampled prior has no density");
                                                     }
                                                     return s.density(theta);
                                                 }},
                                      prior());
    return kml(theta) * density / mkml_;
}

double SurrogateState::kmpe(const PointRef& theta_star, const EmbeddingMode& mode) const {
    PointSet single = theta_star;
    return kmpe_many(single, mode)[0];
}

Vector SurrogateState::kmpe_many(const PointSet& candidates, const EmbeddingMode& mode) const {
    require_posterior();
    if (candidates.rows() != static_cast<Eigen::Index>(param_dim())) {
        throw DimensionError("kmpe: candidate dimension mismatch");
    }
    const auto* gaussian = std::get_if<GaussianPrior>(&prior());
    if (std::holds_alternative<ClosedFormEmbedding>(mode) && gaussian == nullptr) {
        throw DomainError("kmpe: closed-form h needs a Gaussian prior");
    }
    // blocks of candidates keep the m x R matrix H from being materialized
    constexpr Eigen::Index block = 512;
    Vector out(candidates.cols());
    for (Eigen::Index start = 0; start < candidates.cols(); start += block) {
        const Eigen::Index width = std::min(block, candidates.cols() - start);
        const PointSet chunk = candidates.middleCols(start, width);
        const Matrix h = std::visit(
            Overloaded{[&](const ClosedFormEmbedding&) -> Matrix {
                           return posterior_embedding_matrix(sims().thetas(), chunk, *gaussian, hyper_.beta);
                       },
                       [&](const MonteCarloEmbedding& mc) -> Matrix {
                           return posterior_embedding_matrix(sims().thetas(), chunk, *mc.samples, hyper_.beta);
                       }},
            mode);
        out.segment(start, width) = h.transpose() * v_ / mkml_;
    }
    return out;
}

SurrogateState fit(std::shared_ptr<const SimulationSet> sims, const Vector& observed, const Hyperparameters& hyper,
                   const Prior& prior) {
    if (observed.size() != static_cast<Eigen::Index>(sims->summary_dim())) {
        throw DimensionError("fit: observed summary dimension mismatch");
    }
    auto factor = std::make_shared<const FactorizedKernel>(sims, hyper.beta, hyper.lambda, prior);
    Vector kappa = eps_kernel_vector(EpsKernelSpec::pointwise(hyper.eps), observed, sims->summaries());
    return SurrogateState(std::move(factor), observed, hyper, std::move(kappa));
}

SurrogateState fit(const SimulationSet& sims, const Vector& observed, const Hyperparameters& hyper,
                   const Prior& prior) {
    return fit(std::make_shared<const SimulationSet>(sims), observed, hyper, prior);
}

Vector kmp_mode(const SurrogateState& state, const PointSet& starts) {
    if (starts.cols() < 1) {
        throw DomainError("kmp_mode: no starting points");
    }
    const Vector scale = prior_stddev(state.prior());
    const Eigen::Index dim = scale.size();

    Vector best = starts.col(0);
    double best_value = state.kmp(best);
    for (Eigen::Index k = 0; k < starts.cols(); ++k) {
        Vector x = starts.col(k);
        double fx = state.kmp(x);
        double step = 0.5;
        for (int iter = 0; iter < 500 && step > 1e-10; ++iter) {
            // Central differences in prior-standardized coordinates.
            Vector grad(dim);
            for (Eigen::Index d = 0; d < dim; ++d) {
                const double h = 1e-6 * scale[d];
                Vector up = x;
                Vector down = x;
                up[d] += h;
                down[d] -= h;
                grad[d] = (state.kmp(up) - state.kmp(down)) / (2.0 * h) * scale[d];
            }
            const double norm = grad.norm();
            if (!(norm > 0.0) || !std::isfinite(norm)) {
                break;
            }
            const Vector direction = (grad / norm).cwiseProduct(scale);
            bool moved = false;
            while (step > 1e-10) {
                const Vector candidate = x + step * direction;
                const double fc = state.kmp(candidate);
                if (fc > fx) {
                    const double gain = fc - fx;
                    x = candidate;
                    fx = fc;
                    step *= 2.0;
                    moved = true;
                    if (gain <= 1e-14 * std::max(1.0, std::abs(fx))) {
                        step = 0.0;
                    }
                    break;
                }
                step *= 0.5;
            }
            if (!moved) {
                break;
            }
        }
        if (fx > best_value) {
            best_value = fx;
            best = x;
        }
    }
    return best;
}

Vector kmp_mode(const SurrogateState& state, std::size_t restarts, std::uint64_t seed) {
    if (restarts < 1) {
        throw DomainError("kmp_mode: restarts must be at least 1");
    }
    std::mt19937_64 rng(seed);
    const PointSet starts = std::visit(
        Overloaded{[&](const GaussianPrior& g) { return g.sample(restarts, rng); },
                   [&](const SampledPrior& s) {
                       const PointSet& pool = s.samples->samples();
                       std::uniform_int_distribution<Eigen::Index> pick(0, pool.cols() - 1);
                       PointSet out(pool.rows(), static_cast<Eigen::Index>(restarts));
                       for (Eigen::Index k = 0; k < out.cols(); ++k) {
                           out.col(k) = pool.col(pick(rng));
                       }
                       return out;
                   }},
        state.prior());
    return kmp_mode(state, starts);
}

}  // namespace kelfi
