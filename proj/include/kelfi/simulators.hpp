#pragma once

#include "kelfi/kernels.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace kelfi {

/// Counter-based seed derivation: the seed of run `index` in `stream` depends
/// only on (root, stream, index), so serial and parallel drivers agree.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index);

struct SummaryVector {
    Vector values;
    std::vector<std::string> schema;
    bool flagged = false;  // a guard path (log of non-positive mean, zero variance, ...) was taken
};

struct TimeSeries {
    std::vector<double> values;
    double dt = 1.0;
    bool truncated = false;  // event cap or population cap hit
    bool overflow = false;   // non-finite values; the caller should resample
};

// ---------------------------------------------------------------------------
// Exponential-gamma toy problem

/// Mean of `n` exponential variates with the given rate.
double expgamma_simulate(double rate, std::size_t n, std::uint64_t seed);

/// The raw exponential draws behind expgamma_simulate (same seed, same draws).
std::vector<double> expgamma_data(double rate, std::size_t n, std::uint64_t seed);

/// Gamma(shape, rate) density in the shape-rate convention.
struct GammaDensity {
    double shape;
    double rate;

    double operator()(double theta) const;
    double log_density(double theta) const;
    double mean() const { return shape / rate; }
    double mode() const { return shape >= 1.0 ? (shape - 1.0) / rate : 0.0; }
    double variance() const { return shape / (rate * rate); }
};

/// Conjugate posterior of an exponential rate under a Gamma(a, b) prior.
GammaDensity expgamma_true_posterior(double a, double b, std::span<const double> data);
GammaDensity expgamma_true_posterior(double a, double b, std::size_t n, double data_sum);

// ---------------------------------------------------------------------------
// Blowfly

/// Natural-scale blowfly parameters.
struct BlowflyParams {
    double P;
    double delta;
    double N0;
    double sigma_d;
    double sigma_p;
    int tau;

    /// From log parameters ordered (log P, log delta, log N0, log sigma_d, log sigma_p, log tau).
    static BlowflyParams from_log(const PointRef& log_theta);
};

struct BlowflyConfig {
    std::size_t length = 180;
    std::size_t burn_in = 50;
    double initial_population = 180.0;
    double max_population = 1e12;
};

/// N_{t+1} = P N_{t-tau} exp(-N_{t-tau} / N0) e_t + N_t exp(-delta eps_t), with
/// e_t ~ Gamma(1/sigma_p^2, sigma_p^2) and eps_t ~ Gamma(1/sigma_d^2, sigma_d^2)
/// (unit-mean noise; a zero sigma means no noise). The first `burn_in` steps are
/// discarded.
TimeSeries blowfly_simulate(const BlowflyParams& params, const BlowflyConfig& config, std::uint64_t seed);
TimeSeries blowfly_simulate(const PointRef& log_theta, const BlowflyConfig& config, std::uint64_t seed);

struct BlowflySummaryConfig {
    std::size_t smoothing_window = 9;
    double threshold_low = 1000.0;
    double threshold_high = 3000.0;
};

const std::vector<std::string>& blowfly_summary_names();

/// Sorted values split into four rank blocks at ceil(k * size / 4).
std::vector<std::vector<double>> quartile_blocks(std::vector<double> values);

/// Ten statistics: log mean of each quartile of N/1000, mean of each quartile of
/// the first differences of N/1000, and the number of local maxima of the
/// moving-average-smoothed N above the low and high thresholds.
SummaryVector blowfly_summaries(const TimeSeries& series, const BlowflySummaryConfig& config = {});

// ---------------------------------------------------------------------------
// Lotka-Volterra

struct LotkaVolterraConfig {
    double predators0 = 50.0;
    double prey0 = 100.0;
    double t_end = 30.0;
    double record_dt = 0.2;
    std::size_t max_events = 100000;
    double max_population = 100000.0;
};

struct PredatorPreySeries {
    TimeSeries predators;
    TimeSeries prey;
    std::size_t events = 0;
    bool truncated = false;
};

/// Exact stochastic simulation of
///   predator birth  rate r1 * X * Y
///   predator death  rate r2 * X
///   prey birth      rate r3 * Y
///   prey predation  rate r4 * X * Y
/// with X predators and Y prey, recorded every `record_dt` from 0 to t_end.
/// Hitting the event or population cap freezes the state and flags truncation.
PredatorPreySeries lv_gillespie_rates(const PointRef& rates, const LotkaVolterraConfig& config, std::uint64_t seed);
PredatorPreySeries lv_gillespie(const PointRef& log_rates, const LotkaVolterraConfig& config, std::uint64_t seed);

/// Per-statistic standardization constants from a pilot run.
struct LvNormalization {
    Vector mean = Vector::Zero(9);
    Vector stddev = Vector::Ones(9);
};

const std::vector<std::string>& lv_summary_names();

/// Unstandardized statistics: means, log variances (with guard), lag-1 and lag-2
/// autocorrelations of each series, and the predator-prey cross-correlation.
SummaryVector lv_raw_summaries(const PredatorPreySeries& series, double log_variance_guard = 1.0);

SummaryVector lv_summaries(const PredatorPreySeries& series, const LvNormalization& normalization,
                           double log_variance_guard = 1.0);

/// Lag-k autocorrelation; zero for a constant series.
double autocorrelation(std::span<const double> x, std::size_t lag);

// ---------------------------------------------------------------------------
// NMSE

/// Summaries of one simulation at a parameter (original simulator coordinates).
using Simulator = std::function<Vector(const Vector& params, std::uint64_t seed)>;

/// Draws a parameter for the i-th evaluation.
using ParameterSource = std::function<Vector(std::size_t index, std::mt19937_64& rng)>;

/// Simulates with derived seeds (root, stream, index, retry) until the output is finite.
Vector simulate_finite(const Simulator& simulator, const Vector& params, std::uint64_t root, std::uint64_t stream,
                       std::uint64_t index, std::size_t* rejected = nullptr);

/// Per-statistic MSE of simulated summaries against the observation, averaged
/// over `count` parameters drawn from `source`.
Vector mse_per_statistic(const ParameterSource& source, const Vector& observed, const Simulator& simulator,
                         std::size_t count, std::uint64_t seed);

/// 100 * mean_i(MSE_i / baseline_i).
double nmse_from_mse(const Vector& mse, const Vector& prior_baseline);

/// NMSE of a fixed point estimate.
double nmse(const Vector& point_estimate, const Vector& observed, const Simulator& simulator,
            const Vector& prior_baseline, std::size_t n_eval, std::uint64_t seed);

}  // namespace kelfi
