#include "kelfi/kernels.hpp"

#include "kelfi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace kelfi {

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

double median_of(std::vector<double>& values) {
    const auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

LengthScales::LengthScales(Vector scales) : scales_(std::move(scales)) {
    if (scales_.size() == 0) {
        throw DomainError("LengthScales: empty");
    }
    for (Eigen::Index i = 0; i < scales_.size(); ++i) {
        if (!(scales_[i] > 0.0) || !std::isfinite(scales_[i])) {
            throw DomainError("LengthScales: entry " + std::to_string(i) + " is not positive and finite");
        }
    }
}

LengthScales LengthScales::constant(std::size_t dim, double value) {
    return LengthScales(Vector::Constant(static_cast<Eigen::Index>(dim), value));
}

LengthScales LengthScales::scaled(double factor) const { return LengthScales(scales_ * factor); }

EpsKernelSpec::EpsKernelSpec(EpsKernelMode mode, LengthScales eps, double alpha)
    : mode_(mode), eps_(std::move(eps)), norm_const_(1.0), alpha_(alpha) {
    if (mode_ == EpsKernelMode::pointwise) {
        const double root_two_pi = std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < eps_.size(); ++i) {
            norm_const_ /= root_two_pi * eps_[i];
        }
    } else if (!(alpha_ > 0.0)) {
        throw DomainError("EpsKernelSpec: inner kernel scale must be positive");
    }
}

EpsKernelSpec EpsKernelSpec::pointwise(LengthScales eps) {
    return EpsKernelSpec(EpsKernelMode::pointwise, std::move(eps), 0.0);
}

EpsKernelSpec EpsKernelSpec::distributional(double eps, double alpha) {
    return EpsKernelSpec(EpsKernelMode::distributional, LengthScales::constant(1, eps), alpha);
}

GramMatrix::GramMatrix(Matrix entries, LengthScales scales) : entries_(std::move(entries)), scales_(std::move(scales)) {
    require_same_dim(entries_.rows(), entries_.cols(), "GramMatrix");
}

double ard_gaussian(const PointRef& a, const PointRef& b, const LengthScales& scales) {
    require_same_dim(a.size(), b.size(), "ard_gaussian");
    require_same_dim(a.size(), static_cast<Eigen::Index>(scales.size()), "ard_gaussian scales");
    double sum = 0.0;
    for (Eigen::Index d = 0; d < a.size(); ++d) {
        const double z = (a[d] - b[d]) / scales.values()[d];
        sum += z * z;
    }
    return std::exp(-0.5 * sum);
}

Matrix gram(const PointSet& a, const PointSet& b, const LengthScales& scales) {
    const auto dim = static_cast<Eigen::Index>(scales.size());
    require_same_dim(a.rows(), dim, "gram (left points)");
    require_same_dim(b.rows(), dim, "gram (right points)");
    // Standardize once; each entry then costs one squared distance.
    const Vector inv = scales.values().cwiseInverse();
    const Matrix sa = inv.asDiagonal() * a;
    const Matrix sb = inv.asDiagonal() * b;
    Matrix out(a.cols(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            double sum = 0.0;
            for (Eigen::Index d = 0; d < dim; ++d) {
                const double z = sa(d, i) - sb(d, j);
                sum += z * z;
            }
            out(i, j) = std::exp(-0.5 * sum);
        }
    }
    return out;
}

GramMatrix gram(const PointSet& points, const LengthScales& scales) {
    return GramMatrix(gram(points, points, scales), scales);
}

Vector eps_kernel_vector(const EpsKernelSpec& spec, const PointRef& y, const PointSet& summaries) {
    if (spec.mode() != EpsKernelMode::pointwise) {
        throw DomainError("eps_kernel_vector: summary-vector form needs a pointwise spec");
    }
    if (summaries.cols() == 0) {
        throw DomainError("eps_kernel_vector: no simulations");
    }
    require_same_dim(y.size(), static_cast<Eigen::Index>(spec.eps().size()), "eps_kernel_vector");
    require_same_dim(summaries.rows(), y.size(), "eps_kernel_vector summaries");
    Vector out(summaries.cols());
    for (Eigen::Index j = 0; j < summaries.cols(); ++j) {
        out[j] = spec.norm_const() * ard_gaussian(y, summaries.col(j), spec.eps());
    }
    return out;
}

double squared_mmd(const Matrix& x, const Matrix& y, double scale) {
    require_same_dim(x.rows(), y.rows(), "squared_mmd");
    const auto inner = LengthScales::constant(static_cast<std::size_t>(x.rows()), scale);
    return gram(x, x, inner).mean() + gram(y, y, inner).mean() - 2.0 * gram(x, y, inner).mean();
}

Vector eps_kernel_vector(const EpsKernelSpec& spec, const Matrix& observed, std::span<const Matrix> simulated) {
    if (spec.mode() != EpsKernelMode::distributional) {
        throw DomainError("eps_kernel_vector: raw-dataset form needs a distributional spec");
    }
    if (simulated.empty()) {
        throw DomainError("eps_kernel_vector: no simulations");
    }
    const double eps = spec.eps()[0];
    Vector out(static_cast<Eigen::Index>(simulated.size()));
    for (std::size_t j = 0; j < simulated.size(); ++j) {
        if (simulated[j].cols() != observed.cols()) {
            throw DimensionError("eps_kernel_vector: raw datasets must have equal size");
        }
        const double mmd2 = std::max(0.0, squared_mmd(observed, simulated[j], spec.inner_scale()));
        out[static_cast<Eigen::Index>(j)] = std::exp(-0.5 * mmd2 / (eps * eps));
    }
    return out;
}

RegularizedCholesky::RegularizedCholesky(const GramMatrix& gram, double lambda)
    : lambda_(lambda), size_(gram.size()) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw FactorizationError("regularized solve: lambda must be positive and finite");
    }
    Matrix system = gram.entries();
    system.diagonal().array() += static_cast<double>(size_) * lambda;
    llt_.compute(system);
    if (llt_.info() != Eigen::Success) {
        throw FactorizationError("regularized solve: L + m*lambda*I is not positive definite");
    }
}

Vector RegularizedCholesky::solve(const Vector& rhs) const {
    require_same_dim(rhs.size(), static_cast<Eigen::Index>(size_), "regularized solve rhs");
    return llt_.solve(rhs);
}

Vector regularized_solve(const GramMatrix& gram, double lambda, const Vector& rhs) {
    return RegularizedCholesky(gram, lambda).solve(rhs);
}

LengthScales median_heuristic(const PointSet& points) {
    if (points.cols() < 2) {
        throw DomainError("median_heuristic: needs at least two points");
    }
    Vector scales(points.rows());
    std::vector<double> diffs;
    for (Eigen::Index d = 0; d < points.rows(); ++d) {
        diffs.clear();
        for (Eigen::Index i = 0; i < points.cols(); ++i) {
            for (Eigen::Index j = i + 1; j < points.cols(); ++j) {
                const double diff = std::abs(points(d, i) - points(d, j));
                if (diff > 0.0) {
                    diffs.push_back(diff);
                }
            }
        }
        scales[d] = diffs.empty() ? 1.0 : median_of(diffs);
    }
    return LengthScales(std::move(scales));
}

}  // namespace kelfi
