#include "kelfi/experiment.hpp"

#include "kelfi/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace kelfi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// JSON cannot carry infinities; they become null.
nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::vector<std::string> inference_names(const Problem& problem) {
    std::vector<std::string> names;
    for (const auto& n : problem.param_names()) names.push_back(problem.transformed() ? "z_" + n : n);
    return names;
}

}  // namespace

// ---------------------------------------------------------------------------

Prior surrogate_prior(const ExperimentConfig& config, const Problem& problem) {
    if (!config.embedding.monte_carlo) return problem.inference_prior();
    return sampled_from(problem.inference_prior(), config.embedding.samples,
                        derive_seed(config.root_seed, stream_mc_prior, 0));
}

EmbeddingMode embedding_mode(const ExperimentConfig& config, const Problem& problem) {
    if (!config.embedding.monte_carlo) return ClosedFormEmbedding{};
    const Prior prior = surrogate_prior(config, problem);
    return MonteCarloEmbedding{std::get<SampledPrior>(prior).samples};
}

std::shared_ptr<const SimulationSet> stage_simulate(const ExperimentConfig& config, const Problem& problem,
                                                    SimulationDiagnostics* diagnostics) {
    return std::make_shared<const SimulationSet>(simulate_problem(problem, config.m, config.root_seed, diagnostics));
}

LearnedHyperparameters stage_learn(const ExperimentConfig& config, const Problem& problem,
                                   std::shared_ptr<const SimulationSet> sims) {
    MkmlObjective objective(std::move(sims), problem.observed(), surrogate_prior(config, problem));
    ScaleLearningResult result = learn_scales(objective, config.learning);
    LearnedHyperparameters out{result.hyper, result.objective, result.grid_objective, std::nullopt,
                               std::move(result.surface)};
    if (config.ard && problem.summary_dim() > 1) {
        const ArdResult ard = learn_ard_eps(objective, result.hyper, config.ard_sweeps);
        out.isotropic_mkml = result.objective;
        out.hyper = ard.hyper;
        out.mkml = ard.objective;
    }
    return out;
}

SurrogateState stage_fit(const ExperimentConfig& config, const Problem& problem,
                         std::shared_ptr<const SimulationSet> sims, const Hyperparameters& hyper) {
    SurrogateState state = fit(std::move(sims), problem.observed(), hyper, surrogate_prior(config, problem));
    if (!state.posterior_defined()) {
        throw RefusalError(state.diagnostic() +
                           "; try a larger simulation budget or check that the simulator can produce data "
                           "like the observation");
    }
    return state;
}

SuperSampleSet stage_herd(const ExperimentConfig& config, const Problem& problem, const SurrogateState& state) {
    const std::uint64_t seed = derive_seed(config.root_seed, stream_candidates, 0);
    std::mt19937_64 rng(seed);
    CandidateSet candidates(problem.sample_inference_prior(config.herding.candidate_count(), rng),
                            CandidateOrigin::prior_samples, seed);
    const Vector embedding = state.kmpe_many(candidates.points, embedding_mode(config, problem));
    return herd(embedding, candidates, state.hyper().beta, config.herding.samples);
}

PosteriorEstimates stage_estimates(const ExperimentConfig& config, const Problem& problem,
                                   const SurrogateState& state, const SuperSampleSet& samples) {
    PosteriorEstimates out;
    const PointSet theta = problem.to_simulator_many(samples.samples);
    out.mean = theta.rowwise().mean();
    out.intervals = credible_intervals(theta, config.evaluation.interval_level);

    const auto restarts = static_cast<Eigen::Index>(config.evaluation.mode_restarts);
    const Eigen::Index from_samples = std::min<Eigen::Index>(restarts, samples.samples.cols());
    std::mt19937_64 rng(derive_seed(config.root_seed, stream_mode, 0));
    const PointSet draws = problem.sample_inference_prior(static_cast<std::size_t>(restarts), rng);
    PointSet starts(samples.samples.rows(), from_samples + restarts);
    starts.leftCols(from_samples) = samples.samples.leftCols(from_samples);
    starts.rightCols(restarts) = draws;
    out.mode = problem.to_simulator(kmp_mode(state, starts));
    return out;
}

Evaluation stage_evaluate(const ExperimentConfig& config, const Problem& problem, const SurrogateState& state,
                          const PosteriorEstimates& estimates) {
    Evaluation out;
    if (problem.oracle_density && problem.param_dim() == 1) {
        const GaussianPrior& prior = problem.inference_prior();
        const double lo = prior.mean()[0] - 8.0 * prior.stddev()[0];
        const double hi = prior.mean()[0] + 8.0 * prior.stddev()[0];
        out.tv_to_oracle = total_variation_1d([&](double z) { return state.kmp(Vector::Constant(1, z)); },
                                              [&](double z) { return problem.oracle_density(Vector::Constant(1, z)); },
                                              lo, hi);
    }
    if (config.evaluation.nmse) {
        const ParameterSource prior_source = [&](std::size_t, std::mt19937_64& rng) {
            return problem.to_simulator(problem.sample_inference_prior(1, rng).col(0));
        };
        const Vector baseline =
            mse_per_statistic(prior_source, problem.observed(), problem.simulator(), config.evaluation.baseline_count,
                              derive_seed(config.root_seed, stream_baseline, 0));
        out.prior_baseline = baseline;
        out.nmse_mean = nmse(estimates.mean, problem.observed(), problem.simulator(), baseline,
                             config.evaluation.n_eval, derive_seed(config.root_seed, stream_nmse, 0));
        out.nmse_mode = nmse(estimates.mode, problem.observed(), problem.simulator(), baseline,
                             config.evaluation.n_eval, derive_seed(config.root_seed, stream_nmse, 1));
    }
    return out;
}

CsvTable stage_density(const ExperimentConfig& config, const Problem& problem, const SurrogateState& state,
                       const PointSet& super_samples) {
    if (problem.param_dim() > 2) {
        return marginal_histograms(super_samples, std::min<std::size_t>(config.evaluation.density_resolution, 100));
    }
    std::vector<AxisRange> ranges;
    for (const auto& [lo, hi] : config.evaluation.density_range) ranges.push_back({lo, hi});
    if (ranges.empty()) ranges = default_density_ranges(problem);
    return emit_density_grid(state, problem, ranges, config.evaluation.density_resolution);
}

RunArtifact run_experiment(const ExperimentConfig& config, const Problem& problem) {
    config.validate();
    RunArtifact a;
    a.config_hash = config.hash();
    a.problem = problem.id();
    a.root_seed = config.root_seed;
    a.m = config.m;
    a.param_names = problem.param_names();
    a.summary_names = problem.summary_names();
    a.observed = problem.observed();
    a.problem_metadata = problem.metadata;
    a.transformed = problem.transformed();

    auto t = Clock::now();
    const auto sims = stage_simulate(config, problem, &a.simulation);
    a.timing["simulate"] = seconds_since(t);

    t = Clock::now();
    a.learned = stage_learn(config, problem, sims);
    a.timing["learn"] = seconds_since(t);

    t = Clock::now();
    const SurrogateState state = stage_fit(config, problem, sims, a.learned.hyper);
    a.solve_residual = state.solve_residual();
    a.timing["fit"] = seconds_since(t);

    t = Clock::now();
    const SuperSampleSet herded = stage_herd(config, problem, state);
    a.super_samples_inference = herded.samples;
    a.super_samples = problem.to_simulator_many(herded.samples);
    a.negative_kml_at_samples =
        static_cast<std::size_t>((state.kml_many(herded.samples).array() < 0.0).count());
    a.timing["herd"] = seconds_since(t);

    t = Clock::now();
    a.estimates = stage_estimates(config, problem, state, herded);
    a.density = stage_density(config, problem, state, a.super_samples);
    a.timing["estimate"] = seconds_since(t);

    t = Clock::now();
    a.evaluation = stage_evaluate(config, problem, state, a.estimates);
    a.timing["evaluate"] = seconds_since(t);
    return a;
}

RunArtifact run_experiment(const ExperimentConfig& config) { return run_experiment(config, build_problem(config)); }

nlohmann::json RunArtifact::to_json(bool include_timing) const {
    nlohmann::json j;
    j["schema_version"] = artifact_schema_version;
    j["config_hash"] = config_hash;
    j["problem"] = problem;
    j["seeds"] = {{"root", root_seed}};
    j["m"] = m;
    j["param_names"] = param_names;
    j["summary_names"] = summary_names;
    j["observed"] = vec_json(observed);
    j["hyperparameters"] = hyperparameters_json(learned.hyper);
    j["hyperparameters"]["coordinates"] = transformed ? "z (standard normal inference space)" : "parameter";
    j["mkml"] = learned.mkml;
    j["grid_mkml"] = number_or_null(learned.grid_mkml);
    if (learned.isotropic_mkml) j["isotropic_mkml"] = *learned.isotropic_mkml;
    j["posterior_mean"] = vec_json(estimates.mean);
    j["posterior_mode"] = vec_json(estimates.mode);
    nlohmann::json intervals = nlohmann::json::array();
    for (const auto& [lo, hi] : estimates.intervals) intervals.push_back({lo, hi});
    j["intervals"] = intervals;
    j["super_samples"] = super_samples.cols();
    if (evaluation.nmse_mean) j["nmse_mean"] = *evaluation.nmse_mean;
    if (evaluation.nmse_mode) j["nmse_mode"] = *evaluation.nmse_mode;
    if (evaluation.prior_baseline) j["prior_baseline_mse"] = vec_json(*evaluation.prior_baseline);
    if (evaluation.tv_to_oracle) j["tv_to_oracle"] = *evaluation.tv_to_oracle;
    j["diagnostics"] = {{"rejected_simulations", simulation.rejected},
                        {"solve_residual", solve_residual},
                        {"negative_kml_at_samples", negative_kml_at_samples}};
    j["problem_metadata"] = problem_metadata;
    if (include_timing) j["timing_seconds"] = timing;
    return j;
}

std::string RunArtifact::content_hash() const {
    return sha256_hex(to_json(false).dump() + to_csv(points_table(super_samples, param_names)) + to_csv(density));
}

void write_run(const std::filesystem::path& dir, const RunArtifact& a, const SimulationSet& sims,
               const Problem& problem) {
    write_csv(dir / "observed.csv", CsvTable{problem.summary_names(), a.observed.transpose()});
    write_csv(dir / "simulations.csv", simulations_table(sims, problem));
    nlohmann::json hyper = hyperparameters_json(a.learned.hyper);
    hyper["mkml"] = a.learned.mkml;
    hyper["config_hash"] = a.config_hash;
    write_json(dir / "hyperparameters.json", hyper);
    write_csv(dir / "surface.csv", surface_table(a.learned.surface));
    write_csv(dir / "samples.csv", points_table(a.super_samples, problem.param_names()));
    write_csv(dir / "samples_inference.csv", points_table(a.super_samples_inference, inference_names(problem)));
    write_csv(dir / "density.csv", a.density);
    Matrix iv(static_cast<Eigen::Index>(a.estimates.intervals.size()), 3);
    for (std::size_t d = 0; d < a.estimates.intervals.size(); ++d) {
        iv.row(static_cast<Eigen::Index>(d)) << static_cast<double>(d), a.estimates.intervals[d].first,
            a.estimates.intervals[d].second;
    }
    write_csv(dir / "intervals.csv", CsvTable{{"dim", "lower", "upper"}, iv});
    if (problem.metadata.contains("normalization")) {
        write_json(dir / "normalization.json", problem.metadata["normalization"]);
    }
    nlohmann::json artifact = a.to_json(true);
    artifact["content_hash"] = a.content_hash();
    write_json(dir / "artifact.json", artifact);
}

// ---------------------------------------------------------------------------

Vector axis_nodes(const AxisRange& range, std::size_t resolution) {
    if (resolution < 1) throw DomainError("axis_nodes: resolution must be at least 1");
    if (!(range.lo < range.hi)) throw DomainError("axis_nodes: range needs lo < hi");
    if (resolution == 1) return Vector::Constant(1, 0.5 * (range.lo + range.hi));
    return Vector::LinSpaced(static_cast<Eigen::Index>(resolution), range.lo, range.hi);
}

std::vector<AxisRange> default_density_ranges(const Problem& problem) {
    std::vector<AxisRange> out;
    for (const auto& m : problem.marginals()) {
        if (m.family() == Marginal::Family::gaussian) {
            out.push_back({m.param0() - 6.0 * m.param1(), m.param0() + 6.0 * m.param1()});
        } else {
            out.push_back({m.quantile(1e-6), m.quantile(1.0 - 1e-6)});
        }
    }
    return out;
}

CsvTable emit_density_grid(const SurrogateState& state, const Problem& problem, const std::vector<AxisRange>& ranges,
                           std::size_t resolution) {
    const std::size_t dim = problem.param_dim();
    if (dim > 2) throw DomainError("emit_density_grid: grids need D <= 2; use marginal_histograms");
    if (ranges.size() != dim) throw DimensionError("emit_density_grid: one range per parameter required");
    if (!state.posterior_defined()) throw RefusalError(state.diagnostic());

    const auto density = [&](const Vector& theta) {
        if (!problem.transformed()) return state.kmp(theta);
        for (std::size_t d = 0; d < dim; ++d) {
            if (!problem.marginals()[d].interior(theta[static_cast<Eigen::Index>(d)])) return 0.0;
        }
        return transformed_kmp(*problem.transform(), state, theta);
    };

    std::vector<std::string> header = problem.param_names();
    header.emplace_back("kmp");
    const Vector x = axis_nodes(ranges[0], resolution);
    if (dim == 1) {
        Matrix rows(x.size(), 2);
        for (Eigen::Index i = 0; i < x.size(); ++i) rows.row(i) << x[i], density(Vector::Constant(1, x[i]));
        return CsvTable{header, rows};
    }
    const Vector y = axis_nodes(ranges[1], resolution);
    Matrix rows(x.size() * y.size(), 3);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        for (Eigen::Index k = 0; k < y.size(); ++k) {
            Vector theta(2);
            theta << x[i], y[k];
            rows.row(r++) << x[i], y[k], density(theta);
        }
    }
    return CsvTable{header, rows};
}

CsvTable marginal_histograms(const PointSet& samples, std::size_t bins) {
    if (bins < 1 || samples.cols() < 1) throw DomainError("marginal_histograms: need samples and bins >= 1");
    const auto nb = static_cast<Eigen::Index>(bins);
    Matrix rows(samples.rows() * nb, 3);
    for (Eigen::Index d = 0; d < samples.rows(); ++d) {
        double lo = samples.row(d).minCoeff();
        double hi = samples.row(d).maxCoeff();
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double width = (hi - lo) / static_cast<double>(bins);
        Vector counts = Vector::Zero(nb);
        for (Eigen::Index s = 0; s < samples.cols(); ++s) {
            const auto b = std::min<Eigen::Index>(nb - 1, static_cast<Eigen::Index>((samples(d, s) - lo) / width));
            counts[b] += 1.0;
        }
        const double norm = 1.0 / (static_cast<double>(samples.cols()) * width);
        for (Eigen::Index b = 0; b < nb; ++b) {
            rows.row(d * nb + b) << static_cast<double>(d), lo + (static_cast<double>(b) + 0.5) * width,
                counts[b] * norm;
        }
    }
    return CsvTable{{"dim", "center", "density"}, rows};
}

double empirical_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("empirical_quantile: no values");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("empirical_quantile: p must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<std::pair<double, double>> credible_intervals(const PointSet& samples, double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("credible_intervals: level must lie in (0, 1)");
    const double tail = 0.5 * (1.0 - level);
    std::vector<std::pair<double, double>> out;
    for (Eigen::Index d = 0; d < samples.rows(); ++d) {
        std::vector<double> v(samples.cols());
        for (Eigen::Index s = 0; s < samples.cols(); ++s) v[static_cast<std::size_t>(s)] = samples(d, s);
        out.emplace_back(empirical_quantile(v, tail), empirical_quantile(v, 1.0 - tail));
    }
    return out;
}

double total_variation_1d(const std::function<double(double)>& p, const std::function<double(double)>& q, double lo,
                          double hi, std::size_t nodes) {
    if (nodes < 2 || !(lo < hi)) throw DomainError("total_variation_1d: need lo < hi and at least two nodes");
    const double h = (hi - lo) / static_cast<double>(nodes - 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
        const double x = lo + static_cast<double>(i) * h;
        const double w = (i == 0 || i + 1 == nodes) ? 0.5 : 1.0;
        acc += w * std::abs(p(x) - q(x));
    }
    return 0.5 * acc * h;
}

CsvTable surface_table(const MkmlSurface& s) {
    Matrix rows(s.eps.size() * s.beta0.size(), 5);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.eps.size(); ++i) {
        for (Eigen::Index k = 0; k < s.beta0.size(); ++k) {
            rows.row(r++) << s.eps[i], s.beta0[k], std::log10(s.eps[i]), std::log10(s.beta0[k]), s.values(i, k);
        }
    }
    return CsvTable{{"eps", "beta0", "log10_eps", "log10_beta0", "mkml"}, rows};
}

MkmlSurface surface_from_table(const CsvTable& table) {
    if (table.header.size() != 5 || table.header[0] != "eps" || table.header[1] != "beta0" ||
        table.header[4] != "mkml") {
        throw IoError("surface: unexpected columns");
    }
    std::vector<double> eps;
    std::vector<double> beta0;
    for (Eigen::Index r = 0; r < table.rows.rows(); ++r) {
        if (std::find(eps.begin(), eps.end(), table.rows(r, 0)) == eps.end()) eps.push_back(table.rows(r, 0));
        if (std::find(beta0.begin(), beta0.end(), table.rows(r, 1)) == beta0.end()) beta0.push_back(table.rows(r, 1));
    }
    if (static_cast<std::size_t>(table.rows.rows()) != eps.size() * beta0.size()) {
        throw IoError("surface: rows do not form a full grid");
    }
    MkmlSurface s;
    s.eps = Eigen::Map<const Vector>(eps.data(), static_cast<Eigen::Index>(eps.size()));
    s.beta0 = Eigen::Map<const Vector>(beta0.data(), static_cast<Eigen::Index>(beta0.size()));
    s.values.resize(s.eps.size(), s.beta0.size());
    for (Eigen::Index r = 0; r < table.rows.rows(); ++r) {
        const double v = table.rows(r, 4);
        s.values(r / s.beta0.size(), r % s.beta0.size()) = std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    }
    return s;
}

nlohmann::json hyperparameters_json(const Hyperparameters& h) {
    return {{"eps", vec_json(h.eps.values())}, {"beta0", h.beta0},         {"beta", vec_json(h.beta.values())},
            {"lambda", h.lambda},              {"tie_beta", h.tie_beta}, {"tie_lambda", h.tie_lambda}};
}

Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
    try {
        return Hyperparameters{LengthScales(json_vec(j.at("eps"))), j.at("beta0").get<double>(),
                               LengthScales(json_vec(j.at("beta"))), j.at("lambda").get<double>(),
                               j.at("tie_beta").get<bool>(),         j.at("tie_lambda").get<bool>()};
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("hyperparameters: ") + e.what());
    }
}

CsvTable simulations_table(const SimulationSet& sims, const Problem& problem) {
    std::vector<std::string> header = inference_names(problem);
    for (const auto& n : problem.summary_names()) header.push_back(n);
    Matrix rows(static_cast<Eigen::Index>(sims.size()), static_cast<Eigen::Index>(header.size()));
    rows << sims.thetas().transpose(), sims.summaries().transpose();
    return CsvTable{std::move(header), std::move(rows)};
}

SimulationSet simulations_from_table(const CsvTable& table, const Problem& problem) {
    const auto d = static_cast<Eigen::Index>(problem.param_dim());
    const auto n = static_cast<Eigen::Index>(problem.summary_dim());
    if (table.rows.cols() != d + n) throw IoError("simulations: column count does not match the problem");
    if (!table.rows.allFinite()) throw IoError("simulations: non-finite entries");
    return SimulationSet(table.rows.leftCols(d).transpose(), table.rows.rightCols(n).transpose(), "prior");
}

}  // namespace kelfi
