#include "kelfi/errors.hpp"
#include "kelfi/prior_embeddings.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace kelfi;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Monte-Carlo mean and standard error of f over prior draws.
template <class F>
std::pair<double, double> mc_estimate(const GaussianPrior& prior, std::size_t count, std::uint64_t seed, F&& f) {
    std::mt19937_64 rng(seed);
    const PointSet draws = prior.sample(count, rng);
    double s = 0.0, s2 = 0.0;
    for (Eigen::Index t = 0; t < draws.cols(); ++t) {
        const double v = f(draws.col(t));
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(count);
    const double mean = s / n;
    return {mean, std::sqrt(std::max(s2 / n - mean * mean, 0.0) / n)};
}

}  // namespace

TEST_CASE("prior embedding closed form on simple inputs") {
    const GaussianPrior std1 = GaussianPrior::standard(1);
    CHECK(prior_embedding(vec({0.0}), std1, LengthScales::constant(1, 1.0)) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

    // Point-mass prior collapses to l_beta(theta, mu).
    const GaussianPrior point(vec({0.3, -1.0}), vec({1e-9, 1e-9}));
    const Vector theta = vec({0.9, -0.2});
    const LengthScales beta(vec({0.7, 1.4}));
    CHECK(prior_embedding(theta, point, beta) ==
          doctest::Approx(ard_gaussian(theta, point.mean(), beta)).epsilon(1e-6));
}

TEST_CASE("prior embedding bound and its equality case") {
    const GaussianPrior prior(vec({0.5, -1.0}), vec({2.0, 0.3}));
    const LengthScales beta(vec({0.6, 1.1}));
    const double bound = (0.6 / std::hypot(0.6, 2.0)) * (1.1 / std::hypot(1.1, 0.3));
    CHECK(prior_embedding(prior.mean(), prior, beta) == doctest::Approx(bound).epsilon(1e-14));
    std::mt19937_64 rng(4);
    const PointSet pts = prior.sample(50, rng);
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        const double v = prior_embedding(pts.col(j), prior, beta);
        CHECK(v > 0.0);
        CHECK(v < bound);
    }
}

TEST_CASE("prior embedding matches 1D quadrature") {
    const double mu = 0.4, sigma = 1.3, beta = 0.5;
    const GaussianPrior prior(vec({mu}), vec({sigma}));
    for (double theta : {-2.0, 0.0, 0.4, 1.7}) {
        const double q = oracle::trapezoid(
            [&](double t) { return oracle::gauss1(theta - t, beta) * oracle::normal_pdf(t, mu, sigma); },
            mu - 8 * sigma, mu + 8 * sigma, 100001);
        CHECK(prior_embedding(vec({theta}), prior, LengthScales::constant(1, beta)) ==
              doctest::Approx(q).epsilon(1e-9));
    }
}

TEST_CASE("prior embedding closed form vs Monte Carlo in 2D") {
    const GaussianPrior prior(vec({0.2, -0.5}), vec({0.8, 1.5}));
    const LengthScales beta(vec({0.4, 0.9}));
    const Vector theta = vec({0.6, 0.1});
    const auto [mean, se] = mc_estimate(prior, 200000, 77, [&](const PointRef& t) { return ard_gaussian(t, theta, beta); });
    CHECK(std::abs(prior_embedding(theta, prior, beta) - mean) < 3 * se);

    const PriorSampleSet samples = PriorSampleSet::draw(prior, 200000, 77);
    CHECK(prior_embedding(theta, samples, beta) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("posterior embedding kernel on simple inputs") {
    const GaussianPrior std1 = GaussianPrior::standard(1);
    CHECK(posterior_embedding_kernel(vec({0.0}), vec({0.0}), std1, LengthScales::constant(1, 1.0)) ==
          doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));

    const GaussianPrior point(vec({0.3}), vec({1e-9}));
    const LengthScales beta = LengthScales::constant(1, 0.8);
    const Vector a = vec({-0.4}), b = vec({1.1});
    CHECK(posterior_embedding_kernel(a, b, point, beta) ==
          doctest::Approx(ard_gaussian(a, point.mean(), beta) * ard_gaussian(point.mean(), b, beta)).epsilon(1e-6));
}

TEST_CASE("posterior embedding kernel matches 1D quadrature on a grid of cases") {
    struct Case {
        double mu, sigma, beta, theta, theta_star;
    };
    const Case cases[] = {{0.0, 1.0, 1.0, 0.0, 0.0},   {0.0, 1.0, 0.3, 0.5, -0.5}, {1.0, 2.0, 0.7, 0.0, 3.0},
                          {-1.0, 0.5, 2.0, -1.2, -0.4}, {0.3, 1.5, 0.1, 0.3, 0.35}, {2.0, 0.2, 0.5, 1.8, 2.3},
                          {0.0, 3.0, 5.0, -4.0, 4.0},   {0.5, 1.0, 0.05, 0.5, 0.5}, {-2.0, 1.2, 1.2, 0.0, -3.0},
                          {0.0, 0.8, 0.4, 1.5, 1.5}};
    for (const auto& c : cases) {
        const GaussianPrior prior(vec({c.mu}), vec({c.sigma}));
        const double q = oracle::trapezoid(
            [&](double t) {
                return oracle::gauss1(c.theta - t, c.beta) * oracle::gauss1(t - c.theta_star, c.beta) *
                       oracle::normal_pdf(t, c.mu, c.sigma);
            },
            c.mu - 8 * c.sigma, c.mu + 8 * c.sigma, 100001);
        const double h = posterior_embedding_kernel(vec({c.theta}), vec({c.theta_star}), prior,
                                                    LengthScales::constant(1, c.beta));
        CHECK(std::abs(h - q) < 1e-6);
    }
}

TEST_CASE("posterior embedding kernel symmetry and MC agreement") {
    const GaussianPrior prior(vec({0.2, -0.5, 1.0}), vec({0.8, 1.5, 0.4}));
    const LengthScales beta(vec({0.4, 0.9, 0.3}));
    std::mt19937_64 rng(12);
    const PointSet pts = prior.sample(6, rng);
    const PriorSampleSet samples = PriorSampleSet::draw(prior, 2000, 3);
    for (Eigen::Index j = 0; j + 1 < pts.cols(); ++j) {
        const double h = posterior_embedding_kernel(pts.col(j), pts.col(j + 1), prior, beta);
        CHECK(h == doctest::Approx(posterior_embedding_kernel(pts.col(j + 1), pts.col(j), prior, beta)).epsilon(1e-14));
        CHECK(h > 0.0);
        CHECK(posterior_embedding_kernel(pts.col(j), pts.col(j + 1), samples, beta) ==
              doctest::Approx(posterior_embedding_kernel(pts.col(j + 1), pts.col(j), samples, beta)).epsilon(1e-14));
    }

    const Vector a = pts.col(0), b = pts.col(1);
    const auto [mean, se] = mc_estimate(prior, 200000, 5, [&](const PointRef& t) {
        return ard_gaussian(a, t, beta) * ard_gaussian(t, b, beta);
    });
    CHECK(std::abs(posterior_embedding_kernel(a, b, prior, beta) - mean) < 3 * se);
}

TEST_CASE("closed form terms satisfy their invariants") {
    const GaussianPrior prior(vec({0.2, -0.5}), vec({0.8, 1.5}));
    const LengthScales beta(vec({0.4, 2.9}));
    std::mt19937_64 rng(2);
    const PointSet pts = prior.sample(20, rng);
    for (Eigen::Index j = 0; j + 1 < pts.cols(); ++j) {
        const ClosedFormTerms t = closed_form_terms(pts.col(j), pts.col(j + 1), prior, beta);
        for (Eigen::Index d = 0; d < 2; ++d) {
            CHECK(t.nu[d] >= beta[static_cast<std::size_t>(d)]);
            CHECK(t.s[d] < std::min(beta[static_cast<std::size_t>(d)] / std::sqrt(2.0), prior.stddev()[d]));
            CHECK(t.a[d] >= t.b[d] * t.b[d] - 1e-15);
        }
    }
}

TEST_CASE("embedding matrices and vectors agree with scalar forms") {
    const GaussianPrior prior(vec({0.0, 1.0}), vec({1.0, 0.5}));
    const LengthScales beta(vec({0.5, 0.5}));
    std::mt19937_64 rng(9);
    const PointSet thetas = prior.sample(5, rng);
    const PointSet cands = prior.sample(4, rng);
    const Matrix h = posterior_embedding_matrix(thetas, cands, prior, beta);
    const Vector mu = prior_embedding_vector(thetas, prior, beta);
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(mu[i] == doctest::Approx(prior_embedding(thetas.col(i), prior, beta)).epsilon(1e-14));
        for (Eigen::Index r = 0; r < 4; ++r)
            CHECK(h(i, r) ==
                  doctest::Approx(posterior_embedding_kernel(thetas.col(i), cands.col(r), prior, beta)).epsilon(1e-14));
    }
}

TEST_CASE("prior sample sets are seed-reproducible and validated") {
    const GaussianPrior prior(vec({0.0}), vec({2.0}));
    CHECK(PriorSampleSet::draw(prior, 10, 4).samples() == PriorSampleSet::draw(prior, 10, 4).samples());
    CHECK(PriorSampleSet::draw(prior, 10, 4).samples() != PriorSampleSet::draw(prior, 10, 5).samples());
    CHECK_THROWS_AS(GaussianPrior(vec({0.0}), vec({0.0})), DomainError);
    CHECK_THROWS_AS(GaussianPrior(vec({0.0, 1.0}), vec({1.0})), DimensionError);
    CHECK_THROWS_AS(prior_embedding(vec({0.0, 1.0}), prior, LengthScales::constant(1, 1.0)), DimensionError);
}
