#pragma once

#include "kelfi/surrogate.hpp"

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace kelfi {

/// Search box and refinement controls for (eps, beta0). Ranges are log10.
struct LearningConfig {
    std::pair<double, double> eps_log_range{-2.0, 1.0};
    std::pair<double, double> beta0_log_range{-2.0, 1.0};
    std::size_t grid_points = 13;
    std::size_t local_steps = 3;
    double step_tolerance = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

/// MKML as a function of isotropic-or-ARD eps and beta0 under the tie rules
/// beta = beta0 * sigma and lambda = 1e-3 * beta0.
///
/// The factorization for the most recent beta0 is kept, so sweeping eps at a
/// fixed beta0 costs one O(m^2) solve per evaluation.
class MkmlObjective {
public:
    MkmlObjective(std::shared_ptr<const SimulationSet> sims, Vector observed, Prior prior);

    /// q(y); -infinity when the factorization fails or q(y) is not finite.
    double operator()(const LengthScales& eps, double beta0);
    double operator()(double eps, double beta0);

    Hyperparameters hyperparameters(const LengthScales& eps, double beta0) const;

    const SimulationSet& sims() const { return *sims_; }
    const Vector& observed() const { return observed_; }
    const Prior& prior() const { return prior_; }
    std::size_t summary_dim() const { return sims_->summary_dim(); }

private:
    const FactorizedKernel* factor_for(double beta0);

    std::shared_ptr<const SimulationSet> sims_;
    Vector observed_;
    Prior prior_;
    Vector stddev_;
    double cached_beta0_ = 0.0;
    std::shared_ptr<const FactorizedKernel> cached_;
    bool cached_failed_ = false;
};

/// One-shot objective (builds and discards its own factorization).
double mkml_objective(const SimulationSet& sims, const Vector& observed, const Prior& prior, double eps, double beta0);

/// q(y) over an eps x beta0 grid; rows index eps, columns beta0.
struct MkmlSurface {
    Vector eps;
    Vector beta0;
    Matrix values;

    /// Best cell: highest value, ties toward smaller eps then smaller beta0.
    std::pair<Eigen::Index, Eigen::Index> argmax() const;
};

MkmlSurface mkml_surface(MkmlObjective& objective, const Vector& eps_grid, const Vector& beta0_grid);

/// Log10-spaced grid of `count` points over [lo, hi].
Vector log_grid(std::pair<double, double> log_range, std::size_t count);

struct ScaleLearningResult {
    Hyperparameters hyper;
    double objective;       // q(y) at `hyper`
    double grid_objective;  // best q(y) on the grid stage
    MkmlSurface surface;
};

/// Grid search over (eps, beta0) followed by alternating golden-section
/// refinement in log space. The refinement only accepts improvements.
ScaleLearningResult learn_scales(MkmlObjective& objective, const LearningConfig& config);
ScaleLearningResult learn_scales(std::shared_ptr<const SimulationSet> sims, const Vector& observed, const Prior& prior,
                                 const LearningConfig& config);

struct ArdResult {
    Hyperparameters hyper;
    double objective;
    double start_objective;
};

/// Coordinate ascent on log eps_i with beta0 fixed; `sweeps` passes over all
/// statistics. Monotone in the objective.
ArdResult learn_ard_eps(MkmlObjective& objective, const Hyperparameters& start, std::size_t sweeps);

struct DecayPoint {
    std::size_t m;
    double eps;
    double beta0;
    double objective;
};

/// Re-learns (eps, beta0) on each prefix of `sims` named in `checkpoints`.
std::vector<DecayPoint> eps_decay_trace(const SimulationSet& sims, const Vector& observed, const Prior& prior,
                                        const LearningConfig& config, const std::vector<std::size_t>& checkpoints);

}  // namespace kelfi
