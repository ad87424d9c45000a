#pragma once

#include "kelfi/kernels.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace kelfi {

class SurrogateState;

double std_normal_pdf(double z);

/// Phi(z) via the complementary error function.
double std_normal_cdf(double z);

/// Phi^{-1}(u) for u strictly inside (0, 1): rational approximation refined by
/// one Newton step against the CDF. Throws DomainError at 0, 1 or outside.
double std_normal_quantile(double u);

/// One independent prior marginal with CDF, quantile and density.
class Marginal {
public:
    enum class Family { uniform, log_uniform, gaussian, gamma, tabulated };

    static Marginal uniform(double lo, double hi);
    /// log(theta) uniform on [log lo, log hi].
    static Marginal log_uniform(double lo, double hi);
    static Marginal gaussian(double mean, double stddev);
    /// Shape-rate parameterization.
    static Marginal gamma(double shape, double rate);
    /// Piecewise-linear CDF through (x_k, cdf_k); strictly increasing, 0 at the
    /// first knot and 1 at the last.
    static Marginal tabulated(std::vector<double> x, std::vector<double> cdf);

    Family family() const { return family_; }
    std::string descriptor() const;

    double cdf(double theta) const;
    double quantile(double u) const;
    double density(double theta) const;

    /// theta strictly inside the support.
    bool interior(double theta) const;

    /// Parameters as stored: (lo, hi), (mean, stddev) or (shape, rate).
    double param0() const { return p0_; }
    double param1() const { return p1_; }
    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& knot_cdf() const { return c_; }

private:
    Marginal(Family family, double p0, double p1) : family_(family), p0_(p0), p1_(p1) {}

    Family family_;
    double p0_;
    double p1_;
    std::vector<double> x_;
    std::vector<double> c_;
};

/// Coordinate-wise map between a standard-normal space z and the original
/// parameter space: T_d(z_d) = P_d^{-1}(Phi(z_d)).
class MarginalTransform {
public:
    explicit MarginalTransform(std::vector<Marginal> marginals);

    std::size_t dim() const { return marginals_.size(); }
    const std::vector<Marginal>& marginals() const { return marginals_; }

    Vector forward(const PointRef& z) const;
    PointSet forward_many(const PointSet& z) const;

    /// T^{-1}(theta); theta must be interior to the support.
    Vector inverse(const PointRef& theta) const;
    PointSet inverse_many(const PointSet& theta) const;

    /// Product of marginal densities p_Theta(theta).
    double prior_density(const PointRef& theta) const;

    /// det J_{T^{-1}}(theta) = p_Theta(theta) / p_Z(T^{-1}(theta)).
    double inverse_jacobian_det(const PointRef& theta) const;

    /// Prior draws in theta via standard-normal z clamped to +/-8.
    PointSet sample(std::size_t count, std::mt19937_64& rng) const;

private:
    std::vector<Marginal> marginals_;
};

/// Change of variables for a density known in z:
/// q_Theta(theta) = q_Z(T^{-1}(theta)) * p_Theta(theta) / p_Z(T^{-1}(theta)).
/// `prior_density_in_theta` overrides the transform's own marginal densities when set.
double transformed_posterior_density(const MarginalTransform& transform,
                                     const std::function<double(const PointRef&)>& kmp_in_z,
                                     const std::function<double(const PointRef&)>& prior_density_in_theta,
                                     const PointRef& theta);

/// Simplified form for a KMP fitted in z: q(y | T^{-1}(theta)) p_Theta(theta) / q(y).
double transformed_kmp(const MarginalTransform& transform, const SurrogateState& state_in_z, const PointRef& theta);

}  // namespace kelfi
