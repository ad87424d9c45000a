#pragma once

#include "kelfi/learning.hpp"
#include "kelfi/problems.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kelfi {

struct EmbeddingConfig {
    bool monte_carlo = false;
    std::size_t samples = 10000;  // T for the Monte-Carlo embedding
};

struct HerdingConfig {
    std::size_t samples = 1000;   // S
    std::size_t candidates = 0;   // R; 0 means 10 * S
    std::size_t candidate_count() const { return candidates ? candidates : 10 * samples; }
};

struct EvaluationConfig {
    bool nmse = false;
    std::size_t n_eval = 1000;
    std::size_t baseline_count = 10000;
    std::size_t density_resolution = 401;
    std::vector<std::pair<double, double>> density_range;  // empty: from the prior
    std::size_t mode_restarts = 5;
    double interval_level = 0.95;
};

struct SurfaceConfig {
    std::pair<double, double> eps_log_range{-2.0, 1.0};
    std::pair<double, double> beta0_log_range{-2.0, 1.0};
    std::size_t points = 25;
};

/// Everything a run needs. Validated on parse; unknown keys are rejected.
struct ExperimentConfig {
    std::string problem = "toy";
    std::size_t m = 100;
    std::string output_dir = "out";
    std::uint64_t root_seed = 0;

    ToyOptions toy;
    BlowflyOptions blowfly;
    LotkaVolterraOptions lotka_volterra;
    std::string normalization_file;  // LV pilot constants; computed when empty

    LearningConfig learning;
    bool ard = false;
    std::size_t ard_sweeps = 2;
    EmbeddingConfig embedding;
    HerdingConfig herding;
    EvaluationConfig evaluation;
    SurfaceConfig surface;

    void validate() const;

    /// Canonical JSON (sorted keys, every field explicit). `output_dir` is
    /// excluded so moving the results does not change the hash.
    nlohmann::json to_json() const;

    /// SHA-256 of the canonical JSON.
    std::string hash() const;
};

/// Problem ids accepted in `problem`.
const std::vector<std::string>& problem_ids();

ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the problem. Relative sidecar paths resolve against `base_dir`.
Problem build_problem(const ExperimentConfig& config, const std::filesystem::path& base_dir = {});

}  // namespace kelfi
