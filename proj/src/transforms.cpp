#include "kelfi/transforms.hpp"

#include "kelfi/errors.hpp"
#include "kelfi/surrogate.hpp"

#include <boost/math/distributions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kelfi {

namespace {

// Acklam's rational approximation of the lower-half normal quantile.
double quantile_lower_half(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

void require_unit_open(double u, const char* what) {
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError(std::string(what) + ": probability must lie strictly inside (0, 1)");
    }
}

}  // namespace

double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_quantile(double u) {
    require_unit_open(u, "std_normal_quantile");
    // Work in the lower tail, where the CDF is computed without cancellation.
    const bool upper = u > 0.5;
    const double p = upper ? 1.0 - u : u;
    double x = quantile_lower_half(p);
    x -= (std_normal_cdf(x) - p) / std_normal_pdf(x);
    return upper ? -x : x;
}

Marginal Marginal::uniform(double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw DomainError("uniform marginal: need finite lo < hi");
    }
    return Marginal(Family::uniform, lo, hi);
}

Marginal Marginal::log_uniform(double lo, double hi) {
    if (!(lo > 0.0) || !(lo < hi) || !std::isfinite(hi)) {
        throw DomainError("log-uniform marginal: need 0 < lo < hi");
    }
    return Marginal(Family::log_uniform, lo, hi);
}

Marginal Marginal::gaussian(double mean, double stddev) {
    if (!(stddev > 0.0) || !std::isfinite(mean) || !std::isfinite(stddev)) {
        throw DomainError("gaussian marginal: need finite mean and positive stddev");
    }
    return Marginal(Family::gaussian, mean, stddev);
}

Marginal Marginal::gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) {
        throw DomainError("gamma marginal: need positive shape and rate");
    }
    return Marginal(Family::gamma, shape, rate);
}

Marginal Marginal::tabulated(std::vector<double> x, std::vector<double> cdf) {
    if (x.size() != cdf.size() || x.size() < 2) {
        throw DomainError("tabulated marginal: need at least two (x, cdf) knots");
    }
    for (std::size_t k = 1; k < x.size(); ++k) {
        if (!(x[k] > x[k - 1]) || !(cdf[k] > cdf[k - 1])) {
            throw DomainError("tabulated marginal: knots and CDF must be strictly increasing");
        }
    }
    if (cdf.front() != 0.0 || cdf.back() != 1.0) {
        throw DomainError("tabulated marginal: CDF must run from 0 to 1");
    }
    Marginal out(Family::tabulated, x.front(), x.back());
    out.x_ = std::move(x);
    out.c_ = std::move(cdf);
    return out;
}

std::string Marginal::descriptor() const {
    std::ostringstream out;
    out.precision(17);
    switch (family_) {
        case Family::uniform: out << "uniform(" << p0_ << ", " << p1_ << ")"; break;
        case Family::log_uniform: out << "log_uniform(" << p0_ << ", " << p1_ << ")"; break;
        case Family::gaussian: out << "gaussian(" << p0_ << ", " << p1_ << ")"; break;
        case Family::gamma: out << "gamma(" << p0_ << ", " << p1_ << ")"; break;
        case Family::tabulated: out << "tabulated(" << x_.size() << " knots)"; break;
    }
    return out.str();
}

bool Marginal::interior(double theta) const {
    switch (family_) {
        case Family::uniform:
        case Family::log_uniform:
        case Family::tabulated: return theta > p0_ && theta < p1_;
        case Family::gaussian: return std::isfinite(theta);
        case Family::gamma: return theta > 0.0 && std::isfinite(theta);
    }
    return false;
}

double Marginal::cdf(double theta) const {
    switch (family_) {
        case Family::uniform: return std::clamp((theta - p0_) / (p1_ - p0_), 0.0, 1.0);
        case Family::log_uniform:
            if (theta <= p0_) {
                return 0.0;
            }
            return std::clamp(std::log(theta / p0_) / std::log(p1_ / p0_), 0.0, 1.0);
        case Family::gaussian: return std_normal_cdf((theta - p0_) / p1_);
        case Family::gamma:
            if (theta <= 0.0) {
                return 0.0;
            }
            return boost::math::cdf(boost::math::gamma_distribution<double>(p0_, 1.0 / p1_), theta);
        case Family::tabulated: {
            if (theta <= x_.front()) {
                return 0.0;
            }
            if (theta >= x_.back()) {
                return 1.0;
            }
            const auto k = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), theta) - x_.begin());
            const double w = (theta - x_[k - 1]) / (x_[k] - x_[k - 1]);
            return c_[k - 1] + w * (c_[k] - c_[k - 1]);
        }
    }
    return 0.0;
}

double Marginal::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) {
        throw DomainError("quantile: probability outside [0, 1]");
    }
    switch (family_) {
        case Family::uniform: return p0_ + u * (p1_ - p0_);
        case Family::log_uniform: return p0_ * std::exp(u * std::log(p1_ / p0_));
        case Family::gaussian:
            require_unit_open(u, "gaussian quantile");
            return p0_ + p1_ * std_normal_quantile(u);
        case Family::gamma:
            if (u == 0.0) {
                return 0.0;
            }
            require_unit_open(u, "gamma quantile");
            return boost::math::quantile(boost::math::gamma_distribution<double>(p0_, 1.0 / p1_), u);
        case Family::tabulated: {
            const auto k = std::clamp(
                static_cast<std::size_t>(std::upper_bound(c_.begin(), c_.end(), u) - c_.begin()), std::size_t{1},
                c_.size() - 1);
            const double w = (u - c_[k - 1]) / (c_[k] - c_[k - 1]);
            return x_[k - 1] + w * (x_[k] - x_[k - 1]);
        }
    }
    return 0.0;
}

double Marginal::density(double theta) const {
    switch (family_) {
        case Family::uniform: return interior(theta) ? 1.0 / (p1_ - p0_) : 0.0;
        case Family::log_uniform: return interior(theta) ? 1.0 / (theta * std::log(p1_ / p0_)) : 0.0;
        case Family::gaussian: return std_normal_pdf((theta - p0_) / p1_) / p1_;
        case Family::gamma:
            return theta > 0.0 ? boost::math::pdf(boost::math::gamma_distribution<double>(p0_, 1.0 / p1_), theta)
                               : 0.0;
        case Family::tabulated: {
            if (!interior(theta)) {
                return 0.0;
            }
            const auto k = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), theta) - x_.begin());
            return (c_[k] - c_[k - 1]) / (x_[k] - x_[k - 1]);
        }
    }
    return 0.0;
}

MarginalTransform::MarginalTransform(std::vector<Marginal> marginals) : marginals_(std::move(marginals)) {
    if (marginals_.empty()) {
        throw DomainError("MarginalTransform: no marginals");
    }
}

Vector MarginalTransform::forward(const PointRef& z) const {
    if (z.size() != static_cast<Eigen::Index>(dim())) {
        throw DimensionError("forward_transform: dimension mismatch");
    }
    Vector theta(z.size());
    for (Eigen::Index d = 0; d < z.size(); ++d) {
        const Marginal& m = marginals_[static_cast<std::size_t>(d)];
        if (m.family() == Marginal::Family::gaussian) {
            theta[d] = m.param0() + m.param1() * z[d];
        } else {
            theta[d] = m.quantile(std_normal_cdf(z[d]));
        }
    }
    return theta;
}

PointSet MarginalTransform::forward_many(const PointSet& z) const {
    PointSet out(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        out.col(j) = forward(z.col(j));
    }
    return out;
}

Vector MarginalTransform::inverse(const PointRef& theta) const {
    if (theta.size() != static_cast<Eigen::Index>(dim())) {
        throw DimensionError("inverse_transform: dimension mismatch");
    }
    Vector z(theta.size());
    for (Eigen::Index d = 0; d < theta.size(); ++d) {
        const Marginal& m = marginals_[static_cast<std::size_t>(d)];
        if (!m.interior(theta[d])) {
            throw DomainError("inverse_transform: parameter on or outside the prior support boundary");
        }
        if (m.family() == Marginal::Family::gaussian) {
            z[d] = (theta[d] - m.param0()) / m.param1();
        } else {
            z[d] = std_normal_quantile(m.cdf(theta[d]));
        }
    }
    return z;
}

PointSet MarginalTransform::inverse_many(const PointSet& theta) const {
    PointSet out(theta.rows(), theta.cols());
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
        out.col(j) = inverse(theta.col(j));
    }
    return out;
}

double MarginalTransform::prior_density(const PointRef& theta) const {
    if (theta.size() != static_cast<Eigen::Index>(dim())) {
        throw DimensionError("prior_density: dimension mismatch");
    }
    double out = 1.0;
    for (Eigen::Index d = 0; d < theta.size(); ++d) {
        out *= marginals_[static_cast<std::size_t>(d)].density(theta[d]);
    }
    return out;
}

double MarginalTransform::inverse_jacobian_det(const PointRef& theta) const {
    const Vector z = inverse(theta);
    double pz = 1.0;
    for (Eigen::Index d = 0; d < z.size(); ++d) {
        pz *= std_normal_pdf(z[d]);
    }
    return prior_density(theta) / pz;
}

PointSet MarginalTransform::sample(std::size_t count, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal;
    PointSet z(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(count));
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        for (Eigen::Index d = 0; d < z.rows(); ++d) {
            z(d, j) = std::clamp(normal(rng), -8.0, 8.0);
        }
    }
    return forward_many(z);
}

double transformed_posterior_density(const MarginalTransform& transform,
                                     const std::function<double(const PointRef&)>& kmp_in_z,
                                     const std::function<double(const PointRef&)>& prior_density_in_theta,
                                     const PointRef& theta) {
    const Vector z = transform.inverse(theta);
    double pz = 1.0;
    for (Eigen::Index d = 0; d < z.size(); ++d) {
        pz *= std_normal_pdf(z[d]);
    }
    const double p_theta = prior_density_in_theta ? prior_density_in_theta(theta) : transform.prior_density(theta);
    return kmp_in_z(z) * p_theta / pz;
}

double transformed_kmp(const MarginalTransform& transform, const SurrogateState& state_in_z, const PointRef& theta) {
    if (!state_in_z.posterior_defined()) {
        throw RefusalError(state_in_z.diagnostic());
    }
    const Vector z = transform.inverse(theta);
    return state_in_z.kml(z) * transform.prior_density(theta) / state_in_z.mkml();
}

}  // namespace kelfi
