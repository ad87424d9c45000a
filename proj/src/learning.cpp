#include "kelfi/learning.hpp"

#include "kelfi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kelfi {

namespace {

constexpr double minus_inf = -std::numeric_limits<double>::infinity();

// Golden-section maximization of f on [lo, hi]; returns (argmax, value) of the
// best point evaluated, including the supplied incumbent.
template <class F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, double tol, double incumbent_x,
                                     double incumbent_f) {
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double best_x = incumbent_x;
    double best_f = incumbent_f;
    auto consider = [&](double x, double fx) {
        if (fx > best_f) {
            best_x = x;
            best_f = fx;
        }
    };
    double a = lo;
    double b = hi;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = f(c);
    double fd = f(d);
    consider(c, fc);
    consider(d, fd);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
            consider(c, fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
            consider(d, fd);
        }
    }
    return {best_x, best_f};
}

}  // namespace

void LearningConfig::validate() const {
    if (!(eps_log_range.first < eps_log_range.second) || !(beta0_log_range.first < beta0_log_range.second)) {
        throw DomainError("LearningConfig: log ranges need lo < hi");
    }
    if (grid_points < 2) {
        throw DomainError("LearningConfig: grid_points must be at least 2");
    }
    if (!(step_tolerance > 0.0)) {
        throw DomainError("LearningConfig: step_tolerance must be positive");
    }
}

MkmlObjective::MkmlObjective(std::shared_ptr<const SimulationSet> sims, Vector observed, Prior prior)
    : sims_(std::move(sims)), observed_(std::move(observed)), prior_(std::move(prior)), stddev_(prior_stddev(prior_)) {
    if (observed_.size() != static_cast<Eigen::Index>(sims_->summary_dim())) {
        throw DimensionError("MkmlObjective: observed summary dimension mismatch");
    }
}

Hyperparameters MkmlObjective::hyperparameters(const LengthScales& eps, double beta0) const {
    return Hyperparameters::tied(eps, beta0, stddev_);
}

const FactorizedKernel* MkmlObjective::factor_for(double beta0) {
    if (beta0 != cached_beta0_ || (!cached_ && !cached_failed_)) {
        cached_beta0_ = beta0;
        cached_.reset();
        cached_failed_ = false;
        try {
            cached_ = std::make_shared<const FactorizedKernel>(sims_, LengthScales(beta0 * stddev_),
                                                               Hyperparameters::lambda_ratio * beta0, prior_);
        } catch (const FactorizationError&) {
            cached_failed_ = true;
        }
    }
    return cached_.get();
}

double MkmlObjective::operator()(const LengthScales& eps, double beta0) {
    if (!(beta0 > 0.0) || !std::isfinite(beta0)) {
        throw DomainError("mkml objective: beta0 must be positive and finite");
    }
    const FactorizedKernel* factor = factor_for(beta0);
    if (factor == nullptr) {
        return minus_inf;
    }
    const Vector kappa = eps_kernel_vector(EpsKernelSpec::pointwise(eps), observed_, sims_->summaries());
    const double q = factor->mkml(kappa);
    return std::isfinite(q) ? q : minus_inf;
}

double MkmlObjective::operator()(double eps, double beta0) {
    return (*this)(LengthScales::constant(summary_dim(), eps), beta0);
}

double mkml_objective(const SimulationSet& sims, const Vector& observed, const Prior& prior, double eps, double beta0) {
    MkmlObjective objective(std::make_shared<const SimulationSet>(sims), observed, prior);
    return objective(eps, beta0);
}

std::pair<Eigen::Index, Eigen::Index> MkmlSurface::argmax() const {
    // Scanning eps then beta0 in ascending order with a strict comparison keeps
    // the smallest eps (then beta0) among equal values.
    Eigen::Index best_i = -1;
    Eigen::Index best_j = -1;
    double best = minus_inf;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const double v = values(i, j);
            const bool better = best_i < 0 ? v > minus_inf
                                           : (v > best || (v == best && (eps[i] < eps[best_i] ||
                                                                         (eps[i] == eps[best_i] && beta0[j] < beta0[best_j]))));
            if (better) {
                best = v;
                best_i = i;
                best_j = j;
            }
        }
    }
    if (best_i < 0) {
        throw DomainError("MKML surface: every cell is -inf (degenerate simulations)");
    }
    return {best_i, best_j};
}

MkmlSurface mkml_surface(MkmlObjective& objective, const Vector& eps_grid, const Vector& beta0_grid) {
    if (eps_grid.size() == 0 || beta0_grid.size() == 0) {
        throw DomainError("mkml_surface: empty grid");
    }
    MkmlSurface surface{eps_grid, beta0_grid, Matrix(eps_grid.size(), beta0_grid.size())};
    for (Eigen::Index j = 0; j < beta0_grid.size(); ++j) {
        for (Eigen::Index i = 0; i < eps_grid.size(); ++i) {
            surface.values(i, j) = objective(eps_grid[i], beta0_grid[j]);
        }
    }
    return surface;
}

Vector log_grid(std::pair<double, double> log_range, std::size_t count) {
    if (count == 1) {
        return Vector::Constant(1, std::pow(10.0, 0.5 * (log_range.first + log_range.second)));
    }
    Vector out(static_cast<Eigen::Index>(count));
    const double step = (log_range.second - log_range.first) / static_cast<double>(count - 1);
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        out[k] = std::pow(10.0, log_range.first + step * static_cast<double>(k));
    }
    return out;
}

ScaleLearningResult learn_scales(MkmlObjective& objective, const LearningConfig& config) {
    config.validate();
    const Vector eps_grid = log_grid(config.eps_log_range, config.grid_points);
    const Vector beta0_grid = log_grid(config.beta0_log_range, config.grid_points);
    MkmlSurface surface = mkml_surface(objective, eps_grid, beta0_grid);
    const auto [bi, bj] = surface.argmax();
    const double grid_best = surface.values(bi, bj);

    // Track the exact values evaluated so the returned hyperparameters
    // reproduce `best` bit for bit.
    double eps = eps_grid[bi];
    double beta0 = beta0_grid[bj];
    double best = grid_best;
    const double eps_half = (config.eps_log_range.second - config.eps_log_range.first) /
                            static_cast<double>(config.grid_points - 1);
    const double beta_half = (config.beta0_log_range.second - config.beta0_log_range.first) /
                             static_cast<double>(config.grid_points - 1);
    auto exp10 = [](double x) { return std::pow(10.0, x); };

    for (std::size_t pass = 0; pass < config.local_steps; ++pass) {
        const double before = best;
        const double log_eps = std::log10(eps);
        const auto [le, fe] = golden_max([&](double x) { return objective(exp10(x), beta0); },
                                         std::max(log_eps - eps_half, config.eps_log_range.first),
                                         std::min(log_eps + eps_half, config.eps_log_range.second),
                                         config.step_tolerance, log_eps, best);
        if (fe > best) {
            eps = exp10(le);
            best = fe;
        }
        const double log_beta0 = std::log10(beta0);
        const auto [lb, fb] = golden_max([&](double x) { return objective(eps, exp10(x)); },
                                         std::max(log_beta0 - beta_half, config.beta0_log_range.first),
                                         std::min(log_beta0 + beta_half, config.beta0_log_range.second),
                                         config.step_tolerance, log_beta0, best);
        if (fb > best) {
            beta0 = exp10(lb);
            best = fb;
        }
        if (best - before <= 1e-12 * std::abs(before)) {
            break;
        }
    }

    return ScaleLearningResult{objective.hyperparameters(LengthScales::constant(objective.summary_dim(), eps), beta0),
                               best, grid_best, std::move(surface)};
}

ScaleLearningResult learn_scales(std::shared_ptr<const SimulationSet> sims, const Vector& observed, const Prior& prior,
                                 const LearningConfig& config) {
    MkmlObjective objective(std::move(sims), observed, prior);
    return learn_scales(objective, config);
}

ArdResult learn_ard_eps(MkmlObjective& objective, const Hyperparameters& start, std::size_t sweeps) {
    if (start.eps.size() != objective.summary_dim()) {
        throw DimensionError("learn_ard_eps: start eps has wrong length");
    }
    Vector eps = start.eps.values();
    const double start_value = objective(start.eps, start.beta0);
    double best = start_value;
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        const double before = best;
        for (Eigen::Index i = 0; i < eps.size(); ++i) {
            Vector trial = eps;
            const double log_eps = std::log10(eps[i]);
            const auto [xi, fi] = golden_max(
                [&](double le) {
                    trial[i] = std::pow(10.0, le);
                    return objective(LengthScales(trial), start.beta0);
                },
                log_eps - 1.0, log_eps + 1.0, 1e-3, log_eps, best);
            if (fi > best) {
                eps[i] = std::pow(10.0, xi);
                best = fi;
            }
        }
        if (best - before <= 1e-12 * std::abs(before)) {
            break;
        }
    }
    Hyperparameters out = start;
    out.eps = LengthScales(eps);
    return ArdResult{out, best, start_value};
}

std::vector<DecayPoint> eps_decay_trace(const SimulationSet& sims, const Vector& observed, const Prior& prior,
                                        const LearningConfig& config, const std::vector<std::size_t>& checkpoints) {
    std::vector<DecayPoint> trace;
    std::size_t previous = 0;
    for (const std::size_t m : checkpoints) {
        if (m < previous) {
            throw DomainError("eps_decay_trace: checkpoints must be non-decreasing");
        }
        previous = m;
        const auto result =
            learn_scales(std::make_shared<const SimulationSet>(sims.prefix(m)), observed, prior, config);
        trace.push_back(DecayPoint{m, result.hyper.eps[0], result.hyper.beta0, result.objective});
    }
    return trace;
}

}  // namespace kelfi
