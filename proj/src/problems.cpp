#include "kelfi/problems.hpp"

#include "kelfi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kelfi {

namespace {

bool all_gaussian(const std::vector<Marginal>& marginals) {
    return std::all_of(marginals.begin(), marginals.end(),
                       [](const Marginal& m) { return m.family() == Marginal::Family::gaussian; });
}

GaussianPrior inference_prior_for(const std::vector<Marginal>& marginals) {
    if (marginals.empty()) throw DimensionError("Problem: at least one parameter required");
    if (!all_gaussian(marginals)) return GaussianPrior::standard(marginals.size());
    Vector mean(static_cast<Eigen::Index>(marginals.size()));
    Vector stddev(mean.size());
    for (std::size_t d = 0; d < marginals.size(); ++d) {
        mean[static_cast<Eigen::Index>(d)] = marginals[d].param0();
        stddev[static_cast<Eigen::Index>(d)] = marginals[d].param1();
    }
    return GaussianPrior(std::move(mean), std::move(stddev));
}

Vector nan_vector(std::size_t n) {
    return Vector::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::quiet_NaN());
}

}  // namespace

Problem::Problem(std::string id, std::vector<std::string> param_names, std::vector<std::string> summary_names,
                 std::vector<Marginal> marginals, Simulator simulator, Vector observed)
    : id_(std::move(id)),
      param_names_(std::move(param_names)),
      summary_names_(std::move(summary_names)),
      marginals_(std::move(marginals)),
      simulator_(std::move(simulator)),
      observed_(std::move(observed)),
      inference_prior_(inference_prior_for(marginals_)) {
    if (param_names_.size() != marginals_.size()) {
        throw DimensionError("Problem: one name per parameter required");
    }
    if (static_cast<std::size_t>(observed_.size()) != summary_names_.size()) {
        throw DimensionError("Problem: observation does not match the summary schema");
    }
    if (!observed_.allFinite()) {
        throw DomainError("Problem: observation must be finite");
    }
    if (!all_gaussian(marginals_)) {
        transform_ = std::make_shared<const MarginalTransform>(marginals_);
    }
}

Vector Problem::to_simulator(const PointRef& point) const {
    if (transform_) return transform_->forward(point);
    if (static_cast<std::size_t>(point.size()) != param_dim()) throw DimensionError("Problem: dimension mismatch");
    return point;
}

PointSet Problem::to_simulator_many(const PointSet& points) const {
    if (transform_) return transform_->forward_many(points);
    return points;
}

Vector Problem::to_inference(const PointRef& theta) const {
    if (transform_) return transform_->inverse(theta);
    return theta;
}

double Problem::prior_density(const PointRef& theta) const {
    if (transform_) return transform_->prior_density(theta);
    return inference_prior_.density(theta);
}

PointSet Problem::sample_inference_prior(std::size_t count, std::mt19937_64& rng) const {
    PointSet z = inference_prior_.sample(count, rng);
    const Vector lo = inference_prior_.mean() - 8.0 * inference_prior_.stddev();
    const Vector hi = inference_prior_.mean() + 8.0 * inference_prior_.stddev();
    for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) = z.col(j).cwiseMax(lo).cwiseMin(hi);
    return z;
}

// ---------------------------------------------------------------------------

Problem make_toy(const ToyOptions& o) {
    if (!(o.a > 0.0) || !(o.b > 0.0)) throw ConfigError("toy: prior a and b must be positive");
    if (o.n < 1) throw ConfigError("toy: n must be at least 1");
    if (!(o.theta_true > 0.0)) throw ConfigError("toy: theta_true must be positive");
    if (o.noise_statistic && !(o.noise_scale > 0.0)) throw ConfigError("toy: noise_scale must be positive");

    const auto data = expgamma_data(o.theta_true, o.n, o.observation_seed);
    const double y = std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(o.n);

    std::vector<std::string> summaries{"sample_mean"};
    Vector observed(o.noise_statistic ? 2 : 1);
    observed[0] = y;
    if (o.noise_statistic) {
        summaries.emplace_back("noise");
        std::mt19937_64 rng(derive_seed(o.observation_seed, 0, 1));
        observed[1] = o.noise_scale * std::normal_distribution<double>()(rng);
    }

    const std::size_t n = o.n;
    const bool noise = o.noise_statistic;
    const double scale = o.noise_scale;
    Simulator sim = [n, noise, scale](const Vector& theta, std::uint64_t seed) {
        Vector x(noise ? 2 : 1);
        x[0] = expgamma_simulate(theta[0], n, seed);
        if (noise) {
            std::mt19937_64 rng(derive_seed(seed, 0, 1));
            x[1] = scale * std::normal_distribution<double>()(rng);
        }
        return x;
    };

    Problem p("toy", {"rate"}, std::move(summaries), {Marginal::gamma(o.a, o.b)}, std::move(sim), observed);
    p.truth = Vector::Constant(1, o.theta_true);

    const GammaDensity prior{o.a, o.b};
    const GammaDensity post = expgamma_true_posterior(o.a, o.b, data);
    const auto transform = *p.transform();
    p.oracle_density = [transform, prior, post](const PointRef& z) {
        const double theta = transform.forward(z)[0];
        if (!(theta > 0.0) || !std::isfinite(theta)) return 0.0;
        return std_normal_pdf(z[0]) * std::exp(post.log_density(theta) - prior.log_density(theta));
    };
    p.metadata["oracle_posterior"] = {{"family", "gamma"}, {"shape", post.shape}, {"rate", post.rate}};
    p.metadata["observed_data"] = data;
    return p;
}

// ---------------------------------------------------------------------------

Vector blowfly_default_prior_mean() {
    Vector m(6);
    m << 2.0, -1.5, 6.0, -1.0, -1.0, std::log(15.0);
    return m;
}

Vector blowfly_default_prior_stddev() {
    Vector s(6);
    s << 2.0, 0.5, 0.5, 1.0, 1.0, std::log(5.0);
    return s;
}

Problem make_blowfly(const BlowflyOptions& o) {
    const Vector mean = o.prior_mean.size() ? o.prior_mean : blowfly_default_prior_mean();
    const Vector stddev = o.prior_stddev.size() ? o.prior_stddev : blowfly_default_prior_stddev();
    const Vector truth = o.truth.size() ? o.truth : mean;
    if (mean.size() != 6 || stddev.size() != 6 || truth.size() != 6) {
        throw ConfigError("blowfly: prior mean, stddev and truth need six entries");
    }
    std::vector<Marginal> marginals;
    for (Eigen::Index d = 0; d < 6; ++d) marginals.push_back(Marginal::gaussian(mean[d], stddev[d]));

    const BlowflyConfig sim_config = o.simulation;
    const BlowflySummaryConfig sum_config = o.summaries;
    Simulator sim = [sim_config, sum_config](const Vector& log_theta, std::uint64_t seed) {
        const TimeSeries series = blowfly_simulate(log_theta, sim_config, seed);
        if (series.overflow) return nan_vector(10);
        return blowfly_summaries(series, sum_config).values;
    };
    const Vector observed = sim(truth, o.observation_seed);
    if (!observed.allFinite()) throw DomainError("blowfly: observation at the ground truth overflowed");

    Problem p("blowfly", {"log_P", "log_delta", "log_N0", "log_sigma_d", "log_sigma_p", "log_tau"},
              blowfly_summary_names(), std::move(marginals), std::move(sim), observed);
    p.truth = truth;
    return p;
}

// ---------------------------------------------------------------------------

Vector lv_default_truth() {
    Vector t(4);
    t << std::log(0.01), std::log(0.5), std::log(1.0), std::log(0.01);
    return t;
}

LvNormalization lv_pilot_normalization(const MarginalTransform& prior, const LotkaVolterraConfig& simulation,
                                       std::size_t count, std::uint64_t seed, double log_variance_guard) {
    if (count < 2) throw ConfigError("lv pilot: at least two pilot simulations required");
    Matrix stats(9, static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(derive_seed(seed, stream_pilot, i));
        const PointSet theta = prior.sample(1, rng);
        const auto series = lv_gillespie(theta.col(0), simulation, derive_seed(seed, stream_simulation, i));
        stats.col(static_cast<Eigen::Index>(i)) = lv_raw_summaries(series, log_variance_guard).values;
    }
    LvNormalization out;
    out.mean = stats.rowwise().mean();
    const Matrix centered = stats.colwise() - out.mean;
    out.stddev = (centered.array().square().rowwise().sum() / static_cast<double>(count - 1)).sqrt();
    for (Eigen::Index i = 0; i < 9; ++i) {
        if (!(out.stddev[i] > 0.0)) out.stddev[i] = 1.0;
    }
    return out;
}

nlohmann::json to_json(const LvNormalization& n) {
    return {{"schema", lv_summary_names()},
            {"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
            {"stddev", std::vector<double>(n.stddev.data(), n.stddev.data() + n.stddev.size())}};
}

LvNormalization lv_normalization_from_json(const nlohmann::json& value) {
    try {
        const auto mean = value.at("mean").get<std::vector<double>>();
        const auto stddev = value.at("stddev").get<std::vector<double>>();
        if (mean.size() != 9 || stddev.size() != 9) throw ConfigError("lv normalization: nine entries required");
        LvNormalization out;
        out.mean = Eigen::Map<const Vector>(mean.data(), 9);
        out.stddev = Eigen::Map<const Vector>(stddev.data(), 9);
        if (!(out.stddev.array() > 0.0).all()) throw ConfigError("lv normalization: stddevs must be positive");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("lv normalization: ") + e.what());
    }
}

Problem make_lotka_volterra(const LotkaVolterraOptions& o) {
    if (!(o.prior_lo < o.prior_hi)) throw ConfigError("lotka_volterra: prior_lo must be below prior_hi");
    const Vector truth = o.truth.size() ? o.truth : lv_default_truth();
    if (truth.size() != 4) throw ConfigError("lotka_volterra: truth needs four entries");
    std::vector<Marginal> marginals(4, Marginal::uniform(o.prior_lo, o.prior_hi));
    const MarginalTransform transform(marginals);

    const LvNormalization norm =
        o.normalization ? *o.normalization
                        : lv_pilot_normalization(transform, o.simulation, o.pilot_count, o.pilot_seed,
                                                 o.log_variance_guard);
    const LotkaVolterraConfig sim_config = o.simulation;
    const double guard = o.log_variance_guard;
    Simulator sim = [sim_config, norm, guard](const Vector& log_theta, std::uint64_t seed) {
        return lv_summaries(lv_gillespie(log_theta, sim_config, seed), norm, guard).values;
    };
    const Vector observed = sim(truth, o.observation_seed);

    Problem p("lotka_volterra", {"log_theta1", "log_theta2", "log_theta3", "log_theta4"}, lv_summary_names(),
              std::move(marginals), std::move(sim), observed);
    p.truth = truth;
    p.metadata["normalization"] = to_json(norm);
    return p;
}

// ---------------------------------------------------------------------------

SimulationSet simulate_problem(const Problem& problem, std::size_t m, std::uint64_t root_seed,
                               SimulationDiagnostics* diagnostics) {
    if (m < 1) throw ConfigError("simulate: m must be at least 1");
    const auto d = static_cast<Eigen::Index>(problem.param_dim());
    const auto n = static_cast<Eigen::Index>(problem.summary_dim());
    PointSet thetas(d, static_cast<Eigen::Index>(m));
    PointSet summaries(n, static_cast<Eigen::Index>(m));
    std::size_t rejected = 0;
    for (std::size_t j = 0; j < m; ++j) {
        std::mt19937_64 rng(derive_seed(root_seed, stream_parameters, j));
        const PointSet point = problem.sample_inference_prior(1, rng);
        const Vector theta = problem.to_simulator(point.col(0));
        const Vector x = simulate_finite(problem.simulator(), theta, root_seed, stream_simulation, j, &rejected);
        if (x.size() != n) throw DimensionError("simulate: simulator output does not match the summary schema");
        thetas.col(static_cast<Eigen::Index>(j)) = point.col(0);
        summaries.col(static_cast<Eigen::Index>(j)) = x;
    }
    if (diagnostics) diagnostics->rejected = rejected;
    return SimulationSet(std::move(thetas), std::move(summaries), "prior");
}

}  // namespace kelfi
