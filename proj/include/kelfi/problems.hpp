#pragma once

#include "kelfi/prior_embeddings.hpp"
#include "kelfi/simulators.hpp"
#include "kelfi/surrogate.hpp"
#include "kelfi/transforms.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kelfi {

/// Seed streams for derive_seed(root, stream, index).
enum SeedStream : std::uint64_t {
    stream_parameters = 1,
    stream_simulation = 2,
    stream_candidates = 3,
    stream_nmse = 4,
    stream_baseline = 5,
    stream_pilot = 6,
    stream_mode = 7,
    stream_mc_prior = 8,
};

/// An inference problem: prior marginals in simulator coordinates, a seeded
/// simulator of summaries and one observation.
///
/// When every marginal is Gaussian, inference runs directly in simulator
/// coordinates. Otherwise it runs in z = T^{-1}(theta) under a standard normal
/// prior and results are mapped back through T.
class Problem {
public:
    Problem(std::string id, std::vector<std::string> param_names, std::vector<std::string> summary_names,
            std::vector<Marginal> marginals, Simulator simulator, Vector observed);

    const std::string& id() const { return id_; }
    const std::vector<std::string>& param_names() const { return param_names_; }
    const std::vector<std::string>& summary_names() const { return summary_names_; }
    const std::vector<Marginal>& marginals() const { return marginals_; }
    const Simulator& simulator() const { return simulator_; }
    const Vector& observed() const { return observed_; }
    std::size_t param_dim() const { return marginals_.size(); }
    std::size_t summary_dim() const { return summary_names_.size(); }

    bool transformed() const { return transform_ != nullptr; }
    const MarginalTransform* transform() const { return transform_.get(); }

    /// Prior in inference coordinates.
    const GaussianPrior& inference_prior() const { return inference_prior_; }

    Vector to_simulator(const PointRef& point) const;
    PointSet to_simulator_many(const PointSet& points) const;
    Vector to_inference(const PointRef& theta) const;

    /// Prior density in simulator coordinates.
    double prior_density(const PointRef& theta) const;

    /// Prior draws in inference coordinates, clamped to +/-8 stddev.
    PointSet sample_inference_prior(std::size_t count, std::mt19937_64& rng) const;

    std::optional<Vector> truth;
    /// Reference posterior density in inference coordinates, when known.
    std::function<double(const PointRef&)> oracle_density;
    /// Extra metadata persisted with results (e.g. pilot normalization).
    nlohmann::json metadata = nlohmann::json::object();

private:
    std::string id_;
    std::vector<std::string> param_names_;
    std::vector<std::string> summary_names_;
    std::vector<Marginal> marginals_;
    Simulator simulator_;
    Vector observed_;
    std::shared_ptr<const MarginalTransform> transform_;
    GaussianPrior inference_prior_;
};

struct ToyOptions {
    double a = 2.0;  // Gamma prior shape
    double b = 2.0;  // Gamma prior rate
    std::size_t n = 15;
    double theta_true = 1.0;
    std::uint64_t observation_seed = 0;
    /// Appends a statistic that ignores theta: N(0, noise_scale^2).
    bool noise_statistic = false;
    double noise_scale = 1.0;
};

/// Exponential observations with a Gamma(a, b) prior on the rate; summary is
/// the sample mean. The conjugate posterior is the oracle.
Problem make_toy(const ToyOptions& options);

struct BlowflyOptions {
    BlowflyConfig simulation;
    BlowflySummaryConfig summaries;
    Vector prior_mean;    // empty: defaults
    Vector prior_stddev;  // empty: defaults
    Vector truth;         // empty: prior mean
    std::uint64_t observation_seed = 0;
};

/// Gaussian prior means and stddevs of the six log-parameters
/// (log P, log delta, log N0, log sigma_d, log sigma_p, log tau).
Vector blowfly_default_prior_mean();
Vector blowfly_default_prior_stddev();

Problem make_blowfly(const BlowflyOptions& options);

struct LotkaVolterraOptions {
    LotkaVolterraConfig simulation;
    double prior_lo = -5.0;  // uniform prior on each log-rate
    double prior_hi = 2.0;
    Vector truth;  // empty: log(0.01, 0.5, 1, 0.01)
    std::uint64_t observation_seed = 0;
    std::size_t pilot_count = 1000;
    std::uint64_t pilot_seed = 0;
    std::optional<LvNormalization> normalization;  // computed from a pilot run when unset
    double log_variance_guard = 1.0;
};

Vector lv_default_truth();

/// Pilot run: raw summaries of `count` prior simulations, standardized by
/// their per-statistic mean and stddev (stddev 1 where it would be 0).
LvNormalization lv_pilot_normalization(const MarginalTransform& prior, const LotkaVolterraConfig& simulation,
                                       std::size_t count, std::uint64_t seed, double log_variance_guard);

nlohmann::json to_json(const LvNormalization& normalization);
LvNormalization lv_normalization_from_json(const nlohmann::json& value);

Problem make_lotka_volterra(const LotkaVolterraOptions& options);

struct SimulationDiagnostics {
    std::size_t rejected = 0;  // non-finite summaries resampled
};

/// m prior simulations. Parameters are stored in inference coordinates. The
/// j-th pair depends only on (root_seed, j), so a larger m extends a smaller one.
SimulationSet simulate_problem(const Problem& problem, std::size_t m, std::uint64_t root_seed,
                               SimulationDiagnostics* diagnostics = nullptr);

}  // namespace kelfi
