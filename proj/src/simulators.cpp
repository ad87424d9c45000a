#include "kelfi/simulators.hpp"

#include "kelfi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kelfi {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
    const double mu = mean_of(x);
    double acc = 0.0;
    for (double v : x) acc += (v - mu) * (v - mu);
    return acc / static_cast<double>(x.size());
}

// Unit-mean gamma noise; sigma = 0 gives exactly 1 without touching the generator.
double unit_gamma(double sigma, std::mt19937_64& rng) {
    if (sigma == 0.0) return 1.0;
    const double shape = 1.0 / (sigma * sigma);
    std::gamma_distribution<double> g(shape, sigma * sigma);
    return g(rng);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(root ^ splitmix64(stream)) + index);
}

// ---------------------------------------------------------------------------

std::vector<double> expgamma_data(double rate, std::size_t n, std::uint64_t seed) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw DomainError("expgamma_simulate: rate must be positive and finite");
    }
    if (n < 1) {
        throw DomainError("expgamma_simulate: n must be at least 1");
    }
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> dist(rate);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

double expgamma_simulate(double rate, std::size_t n, std::uint64_t seed) {
    const auto data = expgamma_data(rate, n, seed);
    return mean_of(data);
}

double GammaDensity::log_density(double theta) const {
    if (!(theta > 0.0)) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(theta) - rate * theta;
}

double GammaDensity::operator()(double theta) const {
    if (!(theta > 0.0)) return 0.0;
    return std::exp(log_density(theta));
}

GammaDensity expgamma_true_posterior(double a, double b, std::size_t n, double data_sum) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("expgamma_true_posterior: a and b must be positive");
    }
    return GammaDensity{a + static_cast<double>(n), b + data_sum};
}

GammaDensity expgamma_true_posterior(double a, double b, std::span<const double> data) {
    return expgamma_true_posterior(a, b, data.size(), std::accumulate(data.begin(), data.end(), 0.0));
}

// ---------------------------------------------------------------------------

BlowflyParams BlowflyParams::from_log(const PointRef& log_theta) {
    if (log_theta.size() != 6) {
        throw DimensionError("blowfly: six log-parameters required");
    }
    if (!log_theta.allFinite()) {
        throw DomainError("blowfly: log-parameters must be finite");
    }
    BlowflyParams p{};
    p.P = std::exp(log_theta[0]);
    p.delta = std::exp(log_theta[1]);
    p.N0 = std::exp(log_theta[2]);
    p.sigma_d = std::exp(log_theta[3]);
    p.sigma_p = std::exp(log_theta[4]);
    p.tau = std::max(1, static_cast<int>(std::lround(std::exp(log_theta[5]))));
    return p;
}

TimeSeries blowfly_simulate(const BlowflyParams& p, const BlowflyConfig& config, std::uint64_t seed) {
    if (config.length < 1) throw DomainError("blowfly_simulate: length must be at least 1");
    if (p.tau < 1) throw DomainError("blowfly_simulate: tau must be at least 1");
    if (!(p.P >= 0.0) || !(p.delta >= 0.0) || !(p.N0 > 0.0) || !(p.sigma_d >= 0.0) || !(p.sigma_p >= 0.0)) {
        throw DomainError("blowfly_simulate: invalid parameters");
    }
    std::mt19937_64 rng(seed);
    const auto tau = static_cast<std::size_t>(p.tau);
    const std::size_t total = config.burn_in + config.length;

    // history[k] holds N at time k - tau; the first tau + 1 entries are the initial population
    std::vector<double> n(tau + 1 + total, config.initial_population);
    TimeSeries out;
    for (std::size_t t = tau; t < tau + total; ++t) {
        const double lagged = n[t - tau];
        const double e = unit_gamma(p.sigma_p, rng);
        const double eps = unit_gamma(p.sigma_d, rng);
        double next = p.P * lagged * std::exp(-lagged / p.N0) * e + n[t] * std::exp(-p.delta * eps);
        if (!std::isfinite(next)) {
            out.overflow = true;
            next = config.max_population;
        }
        if (next > config.max_population) {
            out.truncated = true;
            next = config.max_population;
        }
        n[t + 1] = next;
    }
    out.values.assign(n.end() - static_cast<std::ptrdiff_t>(config.length), n.end());
    return out;
}

TimeSeries blowfly_simulate(const PointRef& log_theta, const BlowflyConfig& config, std::uint64_t seed) {
    return blowfly_simulate(BlowflyParams::from_log(log_theta), config, seed);
}

const std::vector<std::string>& blowfly_summary_names() {
    static const std::vector<std::string> names = {
        "log_mean_q1", "log_mean_q2", "log_mean_q3", "log_mean_q4", "diff_mean_q1",
        "diff_mean_q2", "diff_mean_q3", "diff_mean_q4", "peaks_low", "peaks_high"};
    return names;
}

std::vector<std::vector<double>> quartile_blocks(std::vector<double> values) {
    if (values.size() < 4) {
        throw DomainError("quartile_blocks: at least four values required");
    }
    std::stable_sort(values.begin(), values.end());
    const std::size_t m = values.size();
    std::vector<std::vector<double>> blocks(4);
    std::size_t lo = 0;
    for (std::size_t k = 1; k <= 4; ++k) {
        const std::size_t hi = (k * m + 3) / 4;
        blocks[k - 1].assign(values.begin() + static_cast<std::ptrdiff_t>(lo),
                             values.begin() + static_cast<std::ptrdiff_t>(hi));
        lo = hi;
    }
    return blocks;
}

SummaryVector blowfly_summaries(const TimeSeries& series, const BlowflySummaryConfig& config) {
    const auto& x = series.values;
    if (x.size() < 8) {
        throw DomainError("blowfly_summaries: at least 8 points required");
    }
    if (config.smoothing_window < 1) {
        throw ConfigError("blowfly_summaries: smoothing window must be at least 1");
    }
    SummaryVector out;
    out.schema = blowfly_summary_names();
    out.values.resize(10);

    std::vector<double> scaled(x.size());
    std::transform(x.begin(), x.end(), scaled.begin(), [](double v) { return v / 1000.0; });
    std::vector<double> diffs(x.size() - 1);
    for (std::size_t t = 0; t + 1 < x.size(); ++t) diffs[t] = scaled[t + 1] - scaled[t];

    const auto level_blocks = quartile_blocks(scaled);
    for (std::size_t k = 0; k < 4; ++k) {
        const double mu = mean_of(level_blocks[k]);
        if (mu > 0.0) {
            out.values[static_cast<Eigen::Index>(k)] = std::log(mu);
        } else {
            out.values[static_cast<Eigen::Index>(k)] = std::log(std::max(mu, 0.0) + 1e-6);
            out.flagged = true;
        }
    }
    const auto diff_blocks = quartile_blocks(diffs);
    for (std::size_t k = 0; k < 4; ++k) {
        out.values[static_cast<Eigen::Index>(4 + k)] = mean_of(diff_blocks[k]);
    }

    const std::size_t w = std::min(config.smoothing_window, x.size());
    std::vector<double> smooth(x.size() - w + 1);
    double window_sum = std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(w), 0.0);
    smooth[0] = window_sum / static_cast<double>(w);
    for (std::size_t i = 1; i < smooth.size(); ++i) {
        window_sum += x[i + w - 1] - x[i - 1];
        smooth[i] = window_sum / static_cast<double>(w);
    }
    auto count_peaks = [&](double threshold) {
        double count = 0.0;
        for (std::size_t i = 1; i + 1 < smooth.size(); ++i) {
            if (smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1] && smooth[i] > threshold) count += 1.0;
        }
        return count;
    };
    out.values[8] = count_peaks(config.threshold_low);
    out.values[9] = count_peaks(config.threshold_high);
    return out;
}

// ---------------------------------------------------------------------------

PredatorPreySeries lv_gillespie_rates(const PointRef& rates, const LotkaVolterraConfig& config, std::uint64_t seed) {
    if (rates.size() != 4) throw DimensionError("lv_gillespie: four rates required");
    if (!(rates.array() >= 0.0).all() || !rates.allFinite()) {
        throw DomainError("lv_gillespie: rates must be non-negative and finite");
    }
    if (!(config.record_dt > 0.0) || !(config.t_end >= 0.0)) {
        throw ConfigError("lv_gillespie: record_dt must be positive and t_end non-negative");
    }
    const auto n_records = static_cast<std::size_t>(std::floor(config.t_end / config.record_dt + 1e-9)) + 1;

    PredatorPreySeries out;
    out.predators.dt = config.record_dt;
    out.prey.dt = config.record_dt;
    out.predators.values.reserve(n_records);
    out.prey.values.reserve(n_records);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double x = config.predators0;
    double y = config.prey0;
    double t = 0.0;
    bool frozen = false;

    for (std::size_t k = 0; k < n_records; ++k) {
        const double t_rec = static_cast<double>(k) * config.record_dt;
        while (!frozen) {
            const double h1 = rates[0] * x * y;
            const double h2 = rates[1] * x;
            const double h3 = rates[2] * y;
            const double h4 = rates[3] * x * y;
            const double total = h1 + h2 + h3 + h4;
            if (!(total > 0.0)) {
                t = std::numeric_limits<double>::infinity();
                break;
            }
            // 1 - u lies in (0, 1], keeping the log finite
            const double wait = -std::log(1.0 - unif(rng)) / total;
            if (t + wait > t_rec) {
                // memorylessness lets the pending event be redrawn after recording
                t = t_rec;
                break;
            }
            t += wait;
            const double pick = unif(rng) * total;
            if (pick < h1) {
                x += 1.0;
            } else if (pick < h1 + h2) {
                x -= 1.0;
            } else if (pick < h1 + h2 + h3) {
                y += 1.0;
            } else {
                y -= 1.0;
            }
            ++out.events;
            if (out.events >= config.max_events || x > config.max_population || y > config.max_population) {
                frozen = true;
                out.truncated = true;
            }
        }
        out.predators.values.push_back(x);
        out.prey.values.push_back(y);
    }
    out.predators.truncated = out.truncated;
    out.prey.truncated = out.truncated;
    return out;
}

PredatorPreySeries lv_gillespie(const PointRef& log_rates, const LotkaVolterraConfig& config, std::uint64_t seed) {
    if (log_rates.size() != 4) throw DimensionError("lv_gillespie: four log-rates required");
    if (!log_rates.allFinite()) throw DomainError("lv_gillespie: log-rates must be finite");
    const Vector rates = log_rates.array().exp();
    return lv_gillespie_rates(rates, config, seed);
}

const std::vector<std::string>& lv_summary_names() {
    static const std::vector<std::string> names = {
        "mean_predators", "mean_prey", "log_var_predators", "log_var_prey", "acf1_predators",
        "acf2_predators", "acf1_prey",  "acf2_prey",        "xcorr"};
    return names;
}

double autocorrelation(std::span<const double> x, std::size_t lag) {
    if (lag >= x.size()) throw DomainError("autocorrelation: lag must be shorter than the series");
    const double mu = mean_of(x);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double d = x[t] - mu;
        den += d * d;
        if (t + lag < x.size()) num += d * (x[t + lag] - mu);
    }
    return den > 0.0 ? num / den : 0.0;
}

SummaryVector lv_raw_summaries(const PredatorPreySeries& series, double log_variance_guard) {
    const auto& xp = series.predators.values;
    const auto& xq = series.prey.values;
    if (xp.size() < 3 || xq.size() != xp.size()) {
        throw DomainError("lv_summaries: two series of equal length >= 3 required");
    }
    if (!(log_variance_guard > 0.0)) {
        throw ConfigError("lv_summaries: log-variance guard must be positive");
    }
    SummaryVector out;
    out.schema = lv_summary_names();
    out.values.resize(9);
    const double vp = variance_of(xp);
    const double vq = variance_of(xq);
    out.values[0] = mean_of(xp);
    out.values[1] = mean_of(xq);
    out.values[2] = std::log(vp + log_variance_guard);
    out.values[3] = std::log(vq + log_variance_guard);
    out.values[4] = autocorrelation(xp, 1);
    out.values[5] = autocorrelation(xp, 2);
    out.values[6] = autocorrelation(xq, 1);
    out.values[7] = autocorrelation(xq, 2);
    if (vp > 0.0 && vq > 0.0) {
        const double mp = out.values[0];
        const double mq = out.values[1];
        double c = 0.0;
        for (std::size_t t = 0; t < xp.size(); ++t) c += (xp[t] - mp) * (xq[t] - mq);
        out.values[8] = c / static_cast<double>(xp.size()) / std::sqrt(vp * vq);
    } else {
        out.values[8] = 0.0;
        out.flagged = true;
    }
    return out;
}

SummaryVector lv_summaries(const PredatorPreySeries& series, const LvNormalization& normalization,
                           double log_variance_guard) {
    if (normalization.mean.size() != 9 || normalization.stddev.size() != 9) {
        throw DimensionError("lv_summaries: normalization must have 9 entries");
    }
    if (!(normalization.stddev.array() > 0.0).all()) {
        throw ConfigError("lv_summaries: normalization stddevs must be positive");
    }
    SummaryVector out = lv_raw_summaries(series, log_variance_guard);
    out.values = (out.values - normalization.mean).cwiseQuotient(normalization.stddev);
    return out;
}

// ---------------------------------------------------------------------------

Vector simulate_finite(const Simulator& simulator, const Vector& params, std::uint64_t root, std::uint64_t stream,
                       std::uint64_t index, std::size_t* rejected) {
    constexpr std::size_t max_tries = 100;
    for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
        const std::uint64_t seed = derive_seed(root, stream + (attempt << 32), index);
        Vector x = simulator(params, seed);
        if (x.allFinite()) return x;
        if (rejected) ++*rejected;
    }
    throw DomainError("simulate_finite: simulator kept returning non-finite summaries");
}

Vector mse_per_statistic(const ParameterSource& source, const Vector& observed, const Simulator& simulator,
                         std::size_t count, std::uint64_t seed) {
    if (count < 1) throw DomainError("mse: count must be at least 1");
    std::mt19937_64 rng(seed);
    Vector acc = Vector::Zero(observed.size());
    for (std::size_t i = 0; i < count; ++i) {
        const Vector params = source(i, rng);
        const Vector x = simulate_finite(simulator, params, seed, 1, i);
        if (x.size() != observed.size()) throw DimensionError("mse: simulator output size mismatch");
        acc += (x - observed).cwiseAbs2();
    }
    return acc / static_cast<double>(count);
}

double nmse_from_mse(const Vector& mse, const Vector& prior_baseline) {
    if (mse.size() != prior_baseline.size() || mse.size() == 0) {
        throw DimensionError("nmse: baseline size mismatch");
    }
    if (!(prior_baseline.array() > 0.0).all()) {
        throw DomainError("nmse: prior baseline entries must be positive");
    }
    return 100.0 * mse.cwiseQuotient(prior_baseline).mean();
}

double nmse(const Vector& point_estimate, const Vector& observed, const Simulator& simulator,
            const Vector& prior_baseline, std::size_t n_eval, std::uint64_t seed) {
    const ParameterSource fixed = [&](std::size_t, std::mt19937_64&) { return point_estimate; };
    return nmse_from_mse(mse_per_statistic(fixed, observed, simulator, n_eval, seed), prior_baseline);
}

}  // namespace kelfi
