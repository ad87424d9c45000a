#pragma once

#include "kelfi/config.hpp"
#include "kelfi/herding.hpp"
#include "kelfi/io.hpp"
#include "kelfi/learning.hpp"
#include "kelfi/problems.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kelfi {

inline constexpr const char* artifact_schema_version = "kelfi-run/1";

// ---------------------------------------------------------------------------
// Stage outputs

struct LearnedHyperparameters {
    Hyperparameters hyper = Hyperparameters::untied(LengthScales::constant(1, 1.0), LengthScales::constant(1, 1.0), 1.0);
    double mkml = 0.0;
    double grid_mkml = 0.0;
    std::optional<double> isotropic_mkml;  // before ARD, when ARD ran
    MkmlSurface surface;
};

struct PosteriorEstimates {
    Vector mean;  // simulator coordinates
    Vector mode;  // KMP mode found in inference coordinates, mapped to simulator coordinates
    std::vector<std::pair<double, double>> intervals;
};

struct Evaluation {
    std::optional<double> nmse_mean;
    std::optional<double> nmse_mode;
    std::optional<double> tv_to_oracle;
    std::optional<Vector> prior_baseline;
};

/// Everything one run produces. Self-describing: carries the config hash and
/// schema version.
struct RunArtifact {
    std::string config_hash;
    std::string problem;
    std::uint64_t root_seed = 0;
    std::size_t m = 0;
    std::vector<std::string> param_names;
    std::vector<std::string> summary_names;
    Vector observed;

    LearnedHyperparameters learned;
    PointSet super_samples;            // simulator coordinates
    PointSet super_samples_inference;  // inference coordinates
    PosteriorEstimates estimates;
    Evaluation evaluation;
    CsvTable density;

    SimulationDiagnostics simulation;
    double solve_residual = 0.0;
    std::size_t negative_kml_at_samples = 0;
    std::map<std::string, double> timing;  // seconds per stage; excluded from the content hash
    nlohmann::json problem_metadata = nlohmann::json::object();
    bool transformed = false;

    nlohmann::json to_json(bool include_timing = true) const;

    /// SHA-256 over the timing-free JSON.
    std::string content_hash() const;
};

// ---------------------------------------------------------------------------
// Stages

/// Prior over the inference coordinates as the surrogate sees it: the Gaussian
/// itself, or fixed draws from it in Monte-Carlo mode.
Prior surrogate_prior(const ExperimentConfig& config, const Problem& problem);

/// Embedding mode for KMPE queries (Monte-Carlo samples are seeded from the root seed).
EmbeddingMode embedding_mode(const ExperimentConfig& config, const Problem& problem);

std::shared_ptr<const SimulationSet> stage_simulate(const ExperimentConfig& config, const Problem& problem,
                                                    SimulationDiagnostics* diagnostics = nullptr);

LearnedHyperparameters stage_learn(const ExperimentConfig& config, const Problem& problem,
                                   std::shared_ptr<const SimulationSet> sims);

/// Throws RefusalError when q(y) <= 0.
SurrogateState stage_fit(const ExperimentConfig& config, const Problem& problem, std::shared_ptr<const SimulationSet> sims,
                         const Hyperparameters& hyper);

/// Herded super-samples in inference coordinates.
SuperSampleSet stage_herd(const ExperimentConfig& config, const Problem& problem, const SurrogateState& state);

/// Mean and intervals of the super-samples; the mode search starts from the
/// first herded samples and from prior draws.
PosteriorEstimates stage_estimates(const ExperimentConfig& config, const Problem& problem,
                                   const SurrogateState& state, const SuperSampleSet& samples);

Evaluation stage_evaluate(const ExperimentConfig& config, const Problem& problem, const SurrogateState& state,
                          const PosteriorEstimates& estimates);

/// KMP grid for D <= 2 (configured or default ranges), super-sample
/// histograms otherwise. `super_samples` are in simulator coordinates.
CsvTable stage_density(const ExperimentConfig& config, const Problem& problem, const SurrogateState& state,
                       const PointSet& super_samples);

/// Full pipeline: simulate, learn, fit, herd, estimate, evaluate.
RunArtifact run_experiment(const ExperimentConfig& config, const Problem& problem);
RunArtifact run_experiment(const ExperimentConfig& config);

/// Writes every stage output of a run into `dir`.
void write_run(const std::filesystem::path& dir, const RunArtifact& artifact, const SimulationSet& sims,
               const Problem& problem);

// ---------------------------------------------------------------------------
// Plot-ready outputs

struct AxisRange {
    double lo;
    double hi;
};

/// Evenly spaced nodes; a single node sits at the midpoint.
Vector axis_nodes(const AxisRange& range, std::size_t resolution);

/// Default plotting ranges in simulator coordinates: central 1 - 2e-6 prior
/// mass for non-Gaussian marginals, mean +/- 6 stddev for Gaussian ones.
std::vector<AxisRange> default_density_ranges(const Problem& problem);

/// KMP on a grid in simulator coordinates (D <= 2), one row per node with
/// columns (param names..., kmp). Throws RefusalError when q(y) <= 0.
CsvTable emit_density_grid(const SurrogateState& state, const Problem& problem, const std::vector<AxisRange>& ranges,
                           std::size_t resolution);

/// Histogram marginals of super-samples, for D > 2: columns (dim, center, density).
CsvTable marginal_histograms(const PointSet& samples, std::size_t bins);

/// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double p);

/// Central empirical intervals per coordinate (e.g. 2.5% and 97.5% for level 0.95).
std::vector<std::pair<double, double>> credible_intervals(const PointSet& samples, double level = 0.95);

/// 0.5 * integral |p - q| on [lo, hi] by the trapezoid rule.
double total_variation_1d(const std::function<double(double)>& p, const std::function<double(double)>& q, double lo,
                          double hi, std::size_t nodes = 4001);

/// Long-format surface: (eps, beta0, log10_eps, log10_beta0, mkml); -inf cells left empty.
CsvTable surface_table(const MkmlSurface& surface);
MkmlSurface surface_from_table(const CsvTable& table);

nlohmann::json hyperparameters_json(const Hyperparameters& hyper);
Hyperparameters hyperparameters_from_json(const nlohmann::json& value);

/// Simulations as a table: inference coordinates then summaries.
CsvTable simulations_table(const SimulationSet& sims, const Problem& problem);
SimulationSet simulations_from_table(const CsvTable& table, const Problem& problem);

}  // namespace kelfi
