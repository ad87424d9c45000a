#include "kelfi/errors.hpp"
#include "kelfi/surrogate.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <random>

using namespace kelfi;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Linear-Gaussian simulator x = theta_0 + noise, prior N(0, 1) per dimension.
SimulationSet linear_sims(std::size_t m, std::size_t dim, std::uint64_t seed, double noise = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    PointSet thetas(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(m));
    PointSet xs(1, static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < thetas.cols(); ++j) {
        for (Eigen::Index d = 0; d < thetas.rows(); ++d) thetas(d, j) = n01(rng);
        xs(0, j) = thetas.col(j).sum() + noise * n01(rng);
    }
    return SimulationSet(thetas, xs);
}

}  // namespace

TEST_CASE("hyperparameter tie rules") {
    const Hyperparameters h = Hyperparameters::tied(LengthScales::constant(2, 0.1), 0.5, vec({2.0, 4.0}));
    CHECK(h.beta[0] == 1.0);
    CHECK(h.beta[1] == 2.0);
    CHECK(h.lambda == 0.5 * 1e-3);
    CHECK(h.tie_beta);
    CHECK(h.tie_lambda);
    const Hyperparameters g = h.with_scales(LengthScales::constant(2, 0.3), 2.0, vec({2.0, 4.0}));
    CHECK(g.beta[1] == 8.0);
    CHECK(g.lambda == 2.0 * 1e-3);
}

TEST_CASE("single-simulation fit reduces to scalar algebra") {
    const SimulationSet sims(Matrix::Constant(1, 1, 0.4), Matrix::Constant(1, 1, 1.0));
    const Vector y = vec({1.2});
    const double lambda = 0.05;
    const Hyperparameters h = Hyperparameters::untied(LengthScales::constant(1, 0.5), LengthScales::constant(1, 0.8), lambda);
    const SurrogateState st = fit(sims, y, h, GaussianPrior::standard(1));
    const double kappa = oracle::normal_pdf(1.2, 1.0, 0.5);
    CHECK(st.weights()[0] == doctest::Approx(kappa / (1.0 + lambda)).epsilon(1e-14));
    const double mu = prior_embedding(vec({0.4}), GaussianPrior::standard(1), LengthScales::constant(1, 0.8));
    CHECK(st.mkml() == doctest::Approx(st.weights()[0] * mu).epsilon(1e-14));
    const Vector ts = vec({-0.7});
    const double hk = posterior_embedding_kernel(vec({0.4}), ts, GaussianPrior::standard(1), LengthScales::constant(1, 0.8));
    CHECK(st.kmpe(ts, ClosedFormEmbedding{}) == doctest::Approx(hk / mu).epsilon(1e-12));
}

TEST_CASE("KML equals the GP regression predictive mean") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> msize(2, 50), dsize(1, 3);
    std::uniform_real_distribution<double> scale(0.2, 2.0), loglam(-4, -1);
    for (int inst = 0; inst < 5; ++inst) {
        const std::size_t dim = static_cast<std::size_t>(dsize(rng));
        const SimulationSet sims = linear_sims(static_cast<std::size_t>(msize(rng)), dim, rng());
        const LengthScales beta = LengthScales::constant(dim, scale(rng));
        const double lambda = std::pow(10.0, loglam(rng));
        const Vector y = vec({0.3});
        const SurrogateState st = fit(sims, y, Hyperparameters::untied(LengthScales::constant(1, 0.5), beta, lambda),
                                      GaussianPrior::standard(dim));
        // GP regression: prior kernel l_beta, noise variance m*lambda, targets kappa.
        const auto m = static_cast<Eigen::Index>(sims.size());
        Matrix k = gram(sims.thetas(), sims.thetas(), beta);
        k.diagonal().array() += static_cast<double>(m) * lambda;
        const Vector targets = eps_kernel_vector(EpsKernelSpec::pointwise(LengthScales::constant(1, 0.5)), y, sims.summaries());
        const Vector alpha = k.fullPivLu().solve(targets);
        const GaussianPrior probe = GaussianPrior::standard(dim);
        const PointSet thetas = probe.sample(100, rng);
        const Vector gp = gram(thetas, sims.thetas(), beta) * alpha;
        CHECK((st.kml_many(thetas) - gp).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(st.solve_residual() < 1e-8);
    }
}

TEST_CASE("zero weights give zero KML") {
    const SimulationSet sims = linear_sims(5, 1, 2);
    // y far from every simulation: kappa underflows to zero.
    const SurrogateState st = fit(sims, vec({1e6}), Hyperparameters::tied(LengthScales::constant(1, 0.1), 1.0, vec({1.0})),
                                  GaussianPrior::standard(1));
    CHECK(st.weights().cwiseAbs().maxCoeff() == 0.0);
    CHECK(st.kml(vec({0.3})) == 0.0);
    CHECK_FALSE(st.posterior_defined());
    CHECK(st.mkml() == 0.0);
    CHECK_THROWS_AS(st.kmp(vec({0.0})), RefusalError);
    CHECK_THROWS_AS(st.kmpe(vec({0.0}), ClosedFormEmbedding{}), RefusalError);
    CHECK(st.diagnostic().find("q(y)") != std::string::npos);
}

TEST_CASE("MKML, KMP and KMPE against 1D quadrature") {
    const SimulationSet sims = linear_sims(40, 1, 17);
    const GaussianPrior prior(vec({0.2}), vec({1.1}));
    const Hyperparameters h = Hyperparameters::tied(LengthScales::constant(1, 0.3), 0.6, prior.stddev());
    const SurrogateState st = fit(sims, vec({0.5}), h, prior);
    REQUIRE(st.posterior_defined());
    const double lo = 0.2 - 8 * 1.1, hi = 0.2 + 8 * 1.1;
    const double q = oracle::trapezoid([&](double t) { return st.kml(vec({t})) * prior.density(vec({t})); }, lo, hi, 100001);
    CHECK(std::abs(st.mkml() - q) < 1e-6);
    CHECK(oracle::trapezoid([&](double t) { return st.kmp(vec({t})); }, lo, hi, 20001) == doctest::Approx(1.0).epsilon(1e-3));
    for (double ts : {-1.0, 0.3, 1.4}) {
        const double e = oracle::trapezoid(
            [&](double t) { return oracle::gauss1(t - ts, h.beta[0]) * st.kmp(vec({t})); }, lo, hi, 100001);
        CHECK(std::abs(st.kmpe(vec({ts}), ClosedFormEmbedding{}) - e) < 1e-6);
    }
    CHECK(std::abs(st.kmp(vec({0.2 + 10 * 1.1}))) < 1e-15);
}

TEST_CASE("KMP integrates to one in 2D") {
    const SimulationSet sims = linear_sims(60, 2, 23);
    const GaussianPrior prior(vec({0.0, 0.5}), vec({1.0, 0.7}));
    const SurrogateState st =
        fit(sims, vec({0.4}), Hyperparameters::tied(LengthScales::constant(1, 0.4), 0.5, prior.stddev()), prior);
    REQUIRE(st.posterior_defined());
    const double total = oracle::trapezoid2([&](double a, double b) { return st.kmp(vec({a, b})); }, -8.0, 8.0,
                                            0.5 - 5.6, 0.5 + 5.6, 401);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("point-mass prior collapses MKML onto the KML at the mean") {
    const SimulationSet sims(Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.9));
    const GaussianPrior point(vec({0.3}), vec({1e-9}));
    const Hyperparameters h = Hyperparameters::untied(LengthScales::constant(1, 0.5), LengthScales::constant(1, 0.7), 1e-3);
    const SurrogateState st = fit(sims, vec({1.0}), h, point);
    CHECK(st.mkml() == doctest::Approx(st.kml(vec({0.3}))).epsilon(1e-9));
}

TEST_CASE("closed-form and Monte-Carlo KMPE agree") {
    const SimulationSet sims = linear_sims(30, 1, 41);
    const GaussianPrior prior = GaussianPrior::standard(1);
    const Hyperparameters h = Hyperparameters::tied(LengthScales::constant(1, 0.4), 0.7, prior.stddev());
    const SurrogateState st = fit(sims, vec({0.2}), h, prior);
    const auto samples = std::make_shared<const PriorSampleSet>(PriorSampleSet::draw(prior, 50000, 6));
    std::mt19937_64 rng(1);
    const PointSet cands = prior.sample(20, rng);
    const Vector closed = st.kmpe_many(cands, ClosedFormEmbedding{});
    const Vector mc = st.kmpe_many(cands, MonteCarloEmbedding{samples});
    for (Eigen::Index r = 0; r < cands.cols(); ++r) {
        // Standard error of (1/q) sum_j v_j l(theta_j, t) l(t, theta*) over the draws.
        Vector per(samples->samples().cols());
        for (Eigen::Index t = 0; t < per.size(); ++t) {
            double s = 0;
            for (Eigen::Index j = 0; j < 30; ++j)
                s += st.weights()[j] * ard_gaussian(sims.thetas().col(j), samples->samples().col(t), h.beta) *
                     ard_gaussian(samples->samples().col(t), cands.col(r), h.beta);
            per[t] = s / st.mkml();
        }
        const double se = std::sqrt((per.array() - per.mean()).square().mean() / static_cast<double>(per.size()));
        CHECK(mc[r] == doctest::Approx(per.mean()).epsilon(1e-10));
        CHECK(std::abs(closed[r] - mc[r]) < 3 * se);
    }
}

TEST_CASE("batched KMPE equals scalar KMPE") {
    const SimulationSet sims = linear_sims(25, 2, 8);
    const GaussianPrior prior = GaussianPrior::standard(2);
    const SurrogateState st =
        fit(sims, vec({0.1}), Hyperparameters::tied(LengthScales::constant(1, 0.5), 0.8, prior.stddev()), prior);
    std::mt19937_64 rng(4);
    const PointSet cands = prior.sample(1100, rng);  // spans more than one internal block
    const Vector batch = st.kmpe_many(cands, ClosedFormEmbedding{});
    for (Eigen::Index r = 0; r < cands.cols(); r += 97)
        CHECK(batch[r] == doctest::Approx(st.kmpe(cands.col(r), ClosedFormEmbedding{})).epsilon(1e-12));
}

TEST_CASE("KMP mode search") {
    // One simulation: kmp(theta) is proportional to l_beta(theta_1, theta) N(theta | 0, 1), whose only
    // stationary point is theta_1 / (1 + beta^2).
    const SimulationSet one(Matrix::Constant(1, 1, 1.5), Matrix::Constant(1, 1, 0.0));
    const SurrogateState st = fit(one, vec({0.0}),
                                  Hyperparameters::untied(LengthScales::constant(1, 0.5), LengthScales::constant(1, 0.8), 1e-3),
                                  GaussianPrior::standard(1));
    double best = -1e300, arg = 0.0;
    for (int i = 0; i <= 200000; ++i) {
        const double t = -4.0 + 8.0 * i / 200000.0;
        const double v = st.kmp(vec({t}));
        if (v > best) best = v, arg = t;
    }
    CHECK(arg == doctest::Approx(1.5 / (1.0 + 0.64)).epsilon(1e-4));
    const Vector mode = kmp_mode(st, 3, 7);
    CHECK(std::abs(mode[0] - arg) < 1e-4);

    // Unimodal posterior from many simulations; starting at the grid argmax never loses ground.
    const SimulationSet sims = linear_sims(80, 1, 5);
    const SurrogateState st2 =
        fit(sims, vec({0.5}), Hyperparameters::tied(LengthScales::constant(1, 0.4), 0.8, vec({1.0})), GaussianPrior::standard(1));
    double gbest = -1e300, garg = 0.0;
    const double step = 1e-3;
    for (double t = -4.0; t <= 4.0; t += step) {
        const double v = st2.kmp(vec({t}));
        if (v > gbest) gbest = v, garg = t;
    }
    const Vector m1 = kmp_mode(st2, Matrix::Constant(1, 1, garg));
    CHECK(st2.kmp(m1) >= gbest);
    CHECK(std::abs(kmp_mode(st2, 5, 1)[0] - garg) <= step);
}

TEST_CASE("fit rejects inconsistent shapes") {
    const SimulationSet sims = linear_sims(5, 2, 1);
    const Hyperparameters h = Hyperparameters::tied(LengthScales::constant(1, 0.5), 1.0, vec({1.0, 1.0}));
    CHECK_THROWS_AS(fit(sims, vec({0.0, 1.0}), h, GaussianPrior::standard(2)), DimensionError);
    CHECK_THROWS_AS(fit(sims, vec({0.0}), h, GaussianPrior::standard(3)), DimensionError);
    CHECK_THROWS_AS(SimulationSet(Matrix::Zero(1, 3), Matrix::Zero(1, 2)), DimensionError);
    CHECK(sims.prefix(3).size() == 3);
    CHECK(sims.prefix(3).thetas() == sims.thetas().leftCols(3));
}
