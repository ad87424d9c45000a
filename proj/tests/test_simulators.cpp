#include "kelfi/errors.hpp"
#include "kelfi/problems.hpp"
#include "kelfi/simulators.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace kelfi;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

TimeSeries series_of(std::vector<double> v) {
    TimeSeries s;
    s.values = std::move(v);
    return s;
}

}  // namespace

TEST_CASE("derived seeds are deterministic and distinct") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t root = 0; root < 4; ++root)
        for (std::uint64_t stream = 0; stream < 4; ++stream)
            for (std::uint64_t index = 0; index < 50; ++index) seen.insert(derive_seed(root, stream, index));
    CHECK(seen.size() == 4 * 4 * 50);
}

TEST_CASE("exponential-gamma simulator moments") {
    CHECK(expgamma_simulate(2.0, 15, 9) == expgamma_simulate(2.0, 15, 9));
    const auto data = expgamma_data(2.0, 15, 9);
    CHECK(std::accumulate(data.begin(), data.end(), 0.0) / 15.0 == doctest::Approx(expgamma_simulate(2.0, 15, 9)).epsilon(1e-14));
    CHECK_THROWS_AS(expgamma_simulate(0.0, 15, 1), DomainError);
    CHECK_THROWS_AS(expgamma_simulate(-1.0, 15, 1), DomainError);

    const double theta = 2.5;
    const int runs = 100000;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < runs; ++k) {
        const double v = expgamma_simulate(theta, 15, derive_seed(3, 0, static_cast<std::uint64_t>(k)));
        s += v;
        s2 += v * v;
    }
    const double mean = s / runs;
    CHECK(std::abs(mean - 1.0 / theta) < 4.0 * (1.0 / theta) / std::sqrt(15.0 * runs));

    double t = 0.0, t2 = 0.0;
    for (int k = 0; k < runs; ++k) {
        const double v = expgamma_simulate(1.0, 15, derive_seed(4, 0, static_cast<std::uint64_t>(k)));
        t += v;
        t2 += v * v;
    }
    const double var = t2 / runs - (t / runs) * (t / runs);
    CHECK(var == doctest::Approx(1.0 / 15.0).epsilon(0.05));
}

TEST_CASE("conjugate posterior") {
    const std::vector<double> none;
    const GammaDensity prior = expgamma_true_posterior(2.0, 3.0, none);
    CHECK(prior.shape == 2.0);
    CHECK(prior.rate == 3.0);

    const std::vector<double> one{1.0};
    const GammaDensity g = expgamma_true_posterior(1.0, 1.0, one);
    CHECK(g.shape == 2.0);
    CHECK(g.rate == 2.0);
    CHECK(g.mode() == 0.5);

    // Posterior mean against quadrature of prior x likelihood.
    const auto data = expgamma_data(1.0, 15, 7);
    const double sum = std::accumulate(data.begin(), data.end(), 0.0);
    const GammaDensity post = expgamma_true_posterior(2.0, 2.0, data);
    const GammaDensity pr{2.0, 2.0};
    auto unnorm = [&](double th) { return pr(th) * std::exp(15.0 * std::log(th) - th * sum); };
    const double z = oracle::trapezoid(unnorm, 1e-12, 10.0, 200001);
    const double m1 = oracle::trapezoid([&](double th) { return th * unnorm(th); }, 1e-12, 10.0, 200001) / z;
    CHECK(std::abs(post.mean() - m1) < 1e-6);
    CHECK(post.mean() == doctest::Approx((2.0 + 15) / (2.0 + sum)).epsilon(1e-14));
    CHECK(oracle::trapezoid([&](double th) { return post(th); }, 1e-12, 10.0, 200001) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("blowfly simulator") {
    const Vector mean = blowfly_default_prior_mean();
    const BlowflyConfig config;
    const TimeSeries a = blowfly_simulate(mean, config, 5);
    CHECK(a.values.size() == 180);
    CHECK(a.values == blowfly_simulate(mean, config, 5).values);
    CHECK(a.values != blowfly_simulate(mean, config, 6).values);

    // Without noise the trajectory ignores the seed and settles on the fixed point.
    const BlowflyParams calm{2.0, 0.5, 500.0, 0.0, 0.0, 2};
    const TimeSeries c1 = blowfly_simulate(calm, config, 1);
    CHECK(c1.values == blowfly_simulate(calm, config, 2).values);
    // Fixed point of N = P N exp(-N/N0) + N exp(-delta): N* = N0 log(P / (1 - exp(-delta))).
    const double fixed = 500.0 * std::log(2.0 / (1.0 - std::exp(-0.5)));
    CHECK(c1.values.back() == doctest::Approx(fixed).epsilon(1e-6));

    const BlowflyParams p = BlowflyParams::from_log(vec({std::log(30.0), std::log(0.2), std::log(400.0), 0.0, -1.0, std::log(14.6)}));
    CHECK(p.P == doctest::Approx(30.0));
    CHECK(p.tau == 15);

    std::mt19937_64 rng(3);
    const Vector sd = blowfly_default_prior_stddev();
    std::normal_distribution<double> n01;
    bool nonnegative = true;
    for (int k = 0; k < 1000; ++k) {
        Vector th(6);
        for (int d = 0; d < 6; ++d) th[d] = mean[d] + sd[d] * n01(rng);
        const TimeSeries s = blowfly_simulate(th, config, derive_seed(1, 0, static_cast<std::uint64_t>(k)));
        for (double v : s.values) nonnegative = nonnegative && v >= 0.0;
    }
    CHECK(nonnegative);
}

TEST_CASE("quartile blocks split by rank") {
    const auto b = quartile_blocks({5, 1, 4, 2, 3, 6, 8, 7, 9});
    REQUIRE(b.size() == 4);
    // Boundaries at ceil(k * 9 / 4) = 3, 5, 7.
    CHECK(b[0] == std::vector<double>{1, 2, 3});
    CHECK(b[1] == std::vector<double>{4, 5});
    CHECK(b[2] == std::vector<double>{6, 7});
    CHECK(b[3] == std::vector<double>{8, 9});
    CHECK_THROWS_AS(quartile_blocks({1, 2, 3}), DomainError);
}

TEST_CASE("blowfly summaries") {
    const SummaryVector constant = blowfly_summaries(series_of(std::vector<double>(180, 1000.0)));
    CHECK(constant.values.size() == 10);
    CHECK(constant.schema == blowfly_summary_names());
    for (int i = 0; i < 8; ++i) CHECK(std::abs(constant.values[i]) < 1e-12);
    CHECK(constant.values[8] == 0.0);
    CHECK(constant.values[9] == 0.0);

    std::vector<double> rising(180);
    for (int t = 0; t < 180; ++t) rising[static_cast<std::size_t>(t)] = 100.0 + 40.0 * t;
    const SummaryVector r = blowfly_summaries(series_of(rising));
    CHECK(r.values[8] == 0.0);
    CHECK(r.values[9] == 0.0);

    // Scaling the series by 1000 shifts the log-mean statistics by log(1000) and
    // scales the difference statistics; peak counts follow when the thresholds scale too.
    const TimeSeries bf = blowfly_simulate(blowfly_default_prior_mean(), BlowflyConfig{}, 3);
    std::vector<double> big = bf.values;
    for (double& v : big) v *= 1000.0;
    const SummaryVector s1 = blowfly_summaries(bf);
    BlowflySummaryConfig scaled;
    scaled.threshold_low *= 1000.0;
    scaled.threshold_high *= 1000.0;
    const SummaryVector s2 = blowfly_summaries(series_of(big), scaled);
    for (int i = 0; i < 4; ++i) CHECK(s2.values[i] - s1.values[i] == doctest::Approx(std::log(1000.0)).epsilon(1e-9));
    for (int i = 4; i < 8; ++i) CHECK(s2.values[i] == doctest::Approx(1000.0 * s1.values[i]).epsilon(1e-9));
    CHECK(s2.values[8] == s1.values[8]);
    CHECK(s2.values[9] == s1.values[9]);

    // A zero quartile mean takes the guarded log.
    std::vector<double> zeros(180, 0.0);
    zeros[100] = 5000.0;
    const SummaryVector z = blowfly_summaries(series_of(zeros));
    CHECK(z.flagged);
    CHECK(z.values[0] == doctest::Approx(std::log(1e-6)));
    CHECK_THROWS_AS(blowfly_summaries(series_of({1, 2, 3})), DomainError);
}

TEST_CASE("blowfly peak counting") {
    // Two bumps above 1000 and one above 3000, smoothing disabled.
    std::vector<double> v(60, 100.0);
    v[10] = 1500.0;
    v[30] = 4000.0;
    v[50] = 900.0;
    BlowflySummaryConfig c;
    c.smoothing_window = 1;
    const SummaryVector s = blowfly_summaries(series_of(v), c);
    CHECK(s.values[8] == 2.0);
    CHECK(s.values[9] == 1.0);
}

TEST_CASE("Lotka-Volterra simulator") {
    LotkaVolterraConfig config;
    const PredatorPreySeries zero = lv_gillespie_rates(Vector::Zero(4), config, 1);
    CHECK(zero.events == 0);
    CHECK(zero.predators.values.size() == 151);
    for (double v : zero.predators.values) CHECK(v == 50.0);
    for (double v : zero.prey.values) CHECK(v == 100.0);

    const Vector truth = lv_default_truth();
    const PredatorPreySeries a = lv_gillespie(truth, config, 7);
    const PredatorPreySeries b = lv_gillespie(truth, config, 7);
    CHECK(a.events == b.events);
    CHECK(a.prey.values == b.prey.values);
    CHECK(a.predators.values == b.predators.values);

    // Pure prey birth: E[Y(t)] = Y0 exp(r t).
    LotkaVolterraConfig birth;
    birth.t_end = 2.0;
    birth.record_dt = 0.5;
    const double rate = 0.3;
    const Vector rates = vec({0.0, 0.0, rate, 0.0});
    double total = 0.0;
    const int runs = 10000;
    for (int k = 0; k < runs; ++k)
        total += lv_gillespie_rates(rates, birth, derive_seed(2, 0, static_cast<std::uint64_t>(k))).prey.values.back();
    CHECK(total / runs == doctest::Approx(100.0 * std::exp(rate * 2.0)).epsilon(0.05));

    // Caps freeze the state and flag truncation.
    LotkaVolterraConfig capped;
    capped.max_events = 10;
    const PredatorPreySeries t = lv_gillespie(truth, capped, 3);
    CHECK(t.truncated);
    CHECK(t.events <= 10);
}

TEST_CASE("Lotka-Volterra summaries") {
    const PredatorPreySeries s = lv_gillespie(lv_default_truth(), LotkaVolterraConfig{}, 11);
    const SummaryVector raw = lv_raw_summaries(s);
    CHECK(raw.values.size() == 9);
    CHECK(raw.schema == lv_summary_names());

    LvNormalization centered;
    centered.mean = raw.values;
    centered.stddev = Vector::Constant(9, 2.0);
    CHECK(lv_summaries(s, centered).values.cwiseAbs().maxCoeff() < 1e-12);

    PredatorPreySeries flat;
    flat.predators = series_of(std::vector<double>(20, 4.0));
    flat.prey = series_of(std::vector<double>(20, 9.0));
    LvNormalization norm;
    norm.mean = Vector::Constant(9, 0.5);
    norm.stddev = Vector::Constant(9, 2.0);
    const SummaryVector f = lv_summaries(flat, norm, 1.0);
    CHECK(f.flagged);
    CHECK(f.values[2] == doctest::Approx((std::log(0.0 + 1.0) - 0.5) / 2.0));
    CHECK(f.values[4] == doctest::Approx(-0.25));

    std::mt19937_64 rng(4);
    std::normal_distribution<double> n01;
    std::vector<double> noise(10000);
    for (double& v : noise) v = n01(rng);
    CHECK(std::abs(autocorrelation(noise, 1)) < 4.0 / 100.0);
    CHECK(autocorrelation(std::vector<double>(10, 3.0), 1) == 0.0);
    CHECK_THROWS_AS(lv_raw_summaries(PredatorPreySeries{}), DomainError);
}

TEST_CASE("NMSE") {
    const Vector observed = vec({1.0, 2.0});
    const Simulator echo = [&](const Vector&, std::uint64_t) { return observed; };
    CHECK(nmse(vec({0.3}), observed, echo, vec({1.0, 1.0}), 50, 1) == 0.0);
    CHECK(nmse_from_mse(vec({1.0, 4.0}), vec({2.0, 2.0})) == 125.0);
    CHECK_THROWS_AS(nmse_from_mse(vec({1.0}), vec({0.0})), DomainError);
    CHECK_THROWS_AS(nmse_from_mse(vec({1.0}), vec({1.0, 1.0})), DimensionError);

    // Prior-sampled estimates score about 100% on the toy.
    const Problem p = make_toy(ToyOptions{});
    const ParameterSource prior = [&](std::size_t, std::mt19937_64& rng) {
        return p.to_simulator(p.sample_inference_prior(1, rng).col(0));
    };
    const Vector baseline = mse_per_statistic(prior, p.observed(), p.simulator(), 10000, 1);
    const Vector fresh = mse_per_statistic(prior, p.observed(), p.simulator(), 10000, 2);
    CHECK(nmse_from_mse(fresh, baseline) == doctest::Approx(100.0).epsilon(0.1));
}

TEST_CASE("non-finite simulations are resampled") {
    int calls = 0;
    const Simulator flaky = [&](const Vector&, std::uint64_t seed) {
        ++calls;
        return calls < 3 ? vec({std::nan("")}) : vec({static_cast<double>(seed % 7)});
    };
    std::size_t rejected = 0;
    const Vector x = simulate_finite(flaky, vec({0.0}), 1, 2, 3, &rejected);
    CHECK(rejected == 2);
    CHECK(std::isfinite(x[0]));
    const Simulator broken = [](const Vector&, std::uint64_t) { return vec({std::nan("")}); };
    CHECK_THROWS_AS(simulate_finite(broken, vec({0.0}), 1, 2, 3), DomainError);
}
