#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace kelfi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A set of points stored one per column (rows are coordinates).
using PointSet = Eigen::MatrixXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;

/// Positive, finite per-dimension length scales.
class LengthScales {
public:
    explicit LengthScales(Vector scales);

    static LengthScales constant(std::size_t dim, double value);

    const Vector& values() const { return scales_; }
    std::size_t size() const { return static_cast<std::size_t>(scales_.size()); }
    double operator[](std::size_t i) const { return scales_[static_cast<Eigen::Index>(i)]; }

    LengthScales scaled(double factor) const;

    bool operator==(const LengthScales& other) const { return scales_ == other.scales_; }

private:
    Vector scales_;
};

enum class EpsKernelMode { pointwise, distributional };

/// The epsilon-kernel kappa_eps(y, x) = c_eps * k_eps(y, x).
///
/// Pointwise mode is the Gaussian density N(y | x, diag(eps^2)) over summary
/// statistics. Distributional mode compares two raw iid datasets through the
/// squared MMD of their empirical embeddings under an isotropic Gaussian inner
/// kernel of scale `alpha`; it is left unnormalized (c_eps = 1).
class EpsKernelSpec {
public:
    static EpsKernelSpec pointwise(LengthScales eps);
    static EpsKernelSpec distributional(double eps, double alpha);

    EpsKernelMode mode() const { return mode_; }
    const LengthScales& eps() const { return eps_; }
    double norm_const() const { return norm_const_; }
    double inner_scale() const { return alpha_; }

private:
    EpsKernelSpec(EpsKernelMode mode, LengthScales eps, double alpha);

    EpsKernelMode mode_;
    LengthScales eps_;
    double norm_const_;
    double alpha_;
};

/// Symmetric Gram matrix of an ARD Gaussian kernel over one point set.
class GramMatrix {
public:
    GramMatrix(Matrix entries, LengthScales scales);

    const Matrix& entries() const { return entries_; }
    const LengthScales& scales() const { return scales_; }
    std::size_t size() const { return static_cast<std::size_t>(entries_.rows()); }

private:
    Matrix entries_;
    LengthScales scales_;
};

/// exp(-1/2 sum_d ((a_d - b_d) / scale_d)^2)
double ard_gaussian(const PointRef& a, const PointRef& b, const LengthScales& scales);

/// Cross Gram matrix: entry (i, j) = ard_gaussian(A.col(i), B.col(j)).
Matrix gram(const PointSet& a, const PointSet& b, const LengthScales& scales);

/// Gram matrix of a point set with itself.
GramMatrix gram(const PointSet& points, const LengthScales& scales);

/// Vector {kappa_eps(y, x_j)} over the columns x_j of `summaries`.
Vector eps_kernel_vector(const EpsKernelSpec& spec, const PointRef& y, const PointSet& summaries);

/// Distributional epsilon-kernel: each dataset holds one raw sample per column.
Vector eps_kernel_vector(const EpsKernelSpec& spec, const Matrix& observed, std::span<const Matrix> simulated);

/// Squared MMD between two empirical distributions under an isotropic Gaussian kernel.
double squared_mmd(const Matrix& x, const Matrix& y, double scale);

/// Cholesky factorization of L + m*lambda*I, computed once and reused for
/// every right-hand side.
class RegularizedCholesky {
public:
    RegularizedCholesky(const GramMatrix& gram, double lambda);

    Vector solve(const Vector& rhs) const;

    double lambda() const { return lambda_; }
    std::size_t size() const { return size_; }

private:
    Eigen::LLT<Matrix> llt_;
    double lambda_;
    std::size_t size_;
};

/// One-shot (L + m*lambda*I)^{-1} rhs.
Vector regularized_solve(const GramMatrix& gram, double lambda, const Vector& rhs);

/// Per-dimension median of non-zero pairwise absolute differences; 1.0 where
/// every difference is zero.
LengthScales median_heuristic(const PointSet& points);

}  // namespace kelfi
