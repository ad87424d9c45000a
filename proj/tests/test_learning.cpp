#include "kelfi/errors.hpp"
#include "kelfi/learning.hpp"
#include "kelfi/problems.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace kelfi;

namespace {

struct ToyData {
    Problem problem;
    std::shared_ptr<const SimulationSet> sims;
};

ToyData toy(std::size_t m, std::uint64_t root, std::uint64_t observation_seed, bool noise = false) {
    ToyOptions o;
    o.observation_seed = observation_seed;
    o.noise_statistic = noise;
    Problem p = make_toy(o);
    auto sims = std::make_shared<const SimulationSet>(simulate_problem(p, m, root));
    return {std::move(p), std::move(sims)};
}

}  // namespace

TEST_CASE("MKML objective is deterministic and matches the one-shot form") {
    const ToyData t = toy(100, 5, 105);
    MkmlObjective obj(t.sims, t.problem.observed(), t.problem.inference_prior());
    const double a = obj(0.2, 0.5);
    CHECK(obj(0.2, 0.5) == a);
    CHECK(obj(0.3, 1.0) != a);
    CHECK(obj(0.2, 0.5) == a);  // after switching beta0 and back
    CHECK(mkml_objective(*t.sims, t.problem.observed(), t.problem.inference_prior(), 0.2, 0.5) == a);
    const Hyperparameters h = obj.hyperparameters(LengthScales::constant(1, 0.2), 0.5);
    CHECK(h.beta[0] == 0.5);
    CHECK(h.lambda == 0.5e-3);
}

TEST_CASE("MKML vanishes as beta0 grows") {
    const ToyData t = toy(100, 5, 105);
    MkmlObjective obj(t.sims, t.problem.observed(), t.problem.inference_prior());
    const double moderate = obj(0.2, 1.0);
    const double big = obj(0.2, 1e4);
    const double huge = obj(0.2, 1e6);
    CHECK(huge >= 0.0);
    CHECK(huge < big);
    CHECK(big < moderate);
    CHECK(huge < 1e-2 * moderate);
}

TEST_CASE("MKML is smooth in log scales") {
    const ToyData t = toy(100, 2, 102);
    MkmlObjective obj(t.sims, t.problem.observed(), t.problem.inference_prior());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> le(-1.0, 0.5), lb(-1.0, 0.5);
    int agree = 0;
    for (int k = 0; k < 20; ++k) {
        const double x = le(rng), y = lb(rng);
        auto f = [&](double a, double b) { return obj(std::pow(10.0, a), std::pow(10.0, b)); };
        for (int axis = 0; axis < 2; ++axis) {
            auto diff = [&](double h) {
                return axis == 0 ? (f(x + h, y) - f(x - h, y)) / (2 * h) : (f(x, y + h) - f(x, y - h)) / (2 * h);
            };
            const double g1 = diff(1e-3), g2 = diff(5e-4);
            if (std::abs(g1 - g2) <= 0.05 * std::max(std::abs(g1), 1e-8)) ++agree;
        }
    }
    CHECK(agree == 40);
}

TEST_CASE("toy surface has an interior maximum") {
    const ToyData t = toy(100, 5, 105);
    MkmlObjective obj(t.sims, t.problem.observed(), t.problem.inference_prior());
    const MkmlSurface s = mkml_surface(obj, log_grid({-2.0, 1.0}, 25), log_grid({-2.0, 1.0}, 25));
    const auto [i, j] = s.argmax();
    CHECK(i > 0);
    CHECK(i < 24);
    CHECK(j > 0);
    CHECK(j < 24);
}

TEST_CASE("surface argmax tie-break and degenerate surfaces") {
    MkmlSurface s;
    s.eps = log_grid({-1.0, 1.0}, 3);
    s.beta0 = log_grid({-1.0, 1.0}, 3);
    s.values = Matrix::Zero(3, 3);
    s.values(2, 0) = 1.0;
    s.values(1, 2) = 1.0;
    s.values(1, 1) = 1.0;
    CHECK(s.argmax() == std::pair<Eigen::Index, Eigen::Index>{1, 1});
    s.values.setConstant(-std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(s.argmax(), DomainError);
}

TEST_CASE("log grids") {
    const Vector g = log_grid({-2.0, 1.0}, 4);
    CHECK(g[0] == doctest::Approx(0.01));
    CHECK(g[1] == doctest::Approx(0.1));
    CHECK(g[3] == doctest::Approx(10.0));
    CHECK(log_grid({-1.0, 1.0}, 1)[0] == doctest::Approx(1.0));
}

TEST_CASE("learn_scales refines without regressing and is reproducible") {
    const ToyData t = toy(100, 1, 101);
    LearningConfig config;
    const ScaleLearningResult a = learn_scales(t.sims, t.problem.observed(), t.problem.inference_prior(), config);
    CHECK(a.objective >= a.grid_objective);
    CHECK(a.grid_objective == a.surface.values.maxCoeff());
    const auto [i, j] = a.surface.argmax();
    CHECK(a.grid_objective == a.surface.values(i, j));

    MkmlObjective obj(t.sims, t.problem.observed(), t.problem.inference_prior());
    CHECK(obj(a.hyper.eps, a.hyper.beta0) == a.objective);
    CHECK(a.hyper.eps[0] >= 0.01 * (1 - 1e-12));
    CHECK(a.hyper.eps[0] <= 10.0 * (1 + 1e-12));

    const ScaleLearningResult b = learn_scales(t.sims, t.problem.observed(), t.problem.inference_prior(), config);
    CHECK(b.hyper.eps == a.hyper.eps);
    CHECK(b.hyper.beta0 == a.hyper.beta0);
    CHECK(b.objective == a.objective);

    // The surface stage shares code with the standalone surface.
    const MkmlSurface s = mkml_surface(obj, log_grid(config.eps_log_range, config.grid_points),
                                       log_grid(config.beta0_log_range, config.grid_points));
    CHECK(s.argmax() == a.surface.argmax());
}

TEST_CASE("learning config validation") {
    LearningConfig c;
    c.eps_log_range = {1.0, -1.0};
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = LearningConfig{};
    c.grid_points = 1;
    CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("ARD on eps") {
    const ToyData t = toy(200, 3, 103, true);
    MkmlObjective obj(t.sims, t.problem.observed(), t.problem.inference_prior());
    const ScaleLearningResult iso = learn_scales(obj, LearningConfig{});

    const ArdResult none = learn_ard_eps(obj, iso.hyper, 0);
    CHECK(none.hyper.eps == iso.hyper.eps);
    CHECK(none.objective == none.start_objective);

    const ArdResult ard = learn_ard_eps(obj, iso.hyper, 3);
    CHECK(ard.objective >= ard.start_objective);
    CHECK(ard.start_objective == iso.objective);
    CHECK(ard.hyper.beta0 == iso.hyper.beta0);
    CHECK(obj(ard.hyper.eps, ard.hyper.beta0) == ard.objective);
    // The appended statistic ignores theta.
    CHECK(ard.hyper.eps[1] > ard.hyper.eps[0]);

    CHECK_THROWS_AS(learn_ard_eps(obj, Hyperparameters::tied(LengthScales::constant(3, 1.0), 1.0, Vector::Ones(1)), 1),
                    DimensionError);
}

TEST_CASE("eps decay trace") {
    const ToyData t = toy(100, 4, 104);
    const LearningConfig config;
    const auto single = eps_decay_trace(*t.sims, t.problem.observed(), t.problem.inference_prior(), config, {100});
    REQUIRE(single.size() == 1);
    const ScaleLearningResult direct = learn_scales(t.sims, t.problem.observed(), t.problem.inference_prior(), config);
    CHECK(single[0].eps == direct.hyper.eps[0]);
    CHECK(single[0].beta0 == direct.hyper.beta0);
    CHECK(single[0].objective == direct.objective);

    const auto dup = eps_decay_trace(*t.sims, t.problem.observed(), t.problem.inference_prior(), config, {50, 50, 100});
    REQUIRE(dup.size() == 3);
    CHECK(dup[0].eps == dup[1].eps);
    CHECK(dup[0].objective == dup[1].objective);
    CHECK(dup[2].m == 100);

    CHECK_THROWS_AS(eps_decay_trace(*t.sims, t.problem.observed(), t.problem.inference_prior(), config, {100, 50}),
                    DomainError);
}
