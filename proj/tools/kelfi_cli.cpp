// kelfi: config-driven driver for the KELFI pipeline.
//
// Each stage writes its outputs into the run directory together with a stamp
// (`<stage>.stamp.json`) holding the config hash. Later stages reuse a stage's
// outputs when the stamp matches the current config and recompute otherwise.

#include "kelfi/config.hpp"
#include "kelfi/errors.hpp"
#include "kelfi/experiment.hpp"
#include "kelfi/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace kelfi;

namespace {

enum ExitCode { exit_ok = 0, exit_config = 2, exit_refusal = 3, exit_io = 4, exit_other = 1 };

struct Context {
    ExperimentConfig config;
    Problem problem;
    fs::path out;
    std::string hash;
};

bool stamp_matches(const Context& ctx, const std::string& stage) {
    const fs::path stamp = ctx.out / (stage + ".stamp.json");
    if (!fs::exists(stamp)) return false;
    return read_json(stamp).value("config_hash", std::string{}) == ctx.hash;
}

void write_stamp(const Context& ctx, const std::string& stage, nlohmann::json extra = nlohmann::json::object()) {
    extra["config_hash"] = ctx.hash;
    extra["stage"] = stage;
    write_json(ctx.out / (stage + ".stamp.json"), extra);
}

std::shared_ptr<const SimulationSet> simulations(const Context& ctx, bool force = false) {
    if (!force && stamp_matches(ctx, "simulate")) {
        return std::make_shared<const SimulationSet>(
            simulations_from_table(read_csv(ctx.out / "simulations.csv"), ctx.problem));
    }
    SimulationDiagnostics diag;
    auto sims = stage_simulate(ctx.config, ctx.problem, &diag);
    write_csv(ctx.out / "observed.csv", CsvTable{ctx.problem.summary_names(), ctx.problem.observed().transpose()});
    write_csv(ctx.out / "simulations.csv", simulations_table(*sims, ctx.problem));
    if (ctx.problem.metadata.contains("normalization")) {
        write_json(ctx.out / "normalization.json", ctx.problem.metadata["normalization"]);
    }
    write_stamp(ctx, "simulate", {{"m", sims->size()}, {"rejected", diag.rejected}});
    std::cerr << "simulate: " << sims->size() << " simulations (" << diag.rejected << " resampled)\n";
    return sims;
}

Hyperparameters hyperparameters(const Context& ctx, std::shared_ptr<const SimulationSet> sims, bool force = false) {
    if (!force && stamp_matches(ctx, "learn")) {
        return hyperparameters_from_json(read_json(ctx.out / "hyperparameters.json"));
    }
    const LearnedHyperparameters learned = stage_learn(ctx.config, ctx.problem, std::move(sims));
    nlohmann::json h = hyperparameters_json(learned.hyper);
    h["mkml"] = learned.mkml;
    h["grid_mkml"] = learned.grid_mkml;
    if (learned.isotropic_mkml) h["isotropic_mkml"] = *learned.isotropic_mkml;
    h["config_hash"] = ctx.hash;
    write_json(ctx.out / "hyperparameters.json", h);
    write_csv(ctx.out / "surface.csv", surface_table(learned.surface));
    write_stamp(ctx, "learn");
    std::cerr << "learn: mkml " << learned.mkml << " at beta0 " << learned.hyper.beta0 << "\n";
    return learned.hyper;
}

SurrogateState fitted(const Context& ctx, bool force_learn = false) {
    auto sims = simulations(ctx);
    const Hyperparameters hyper = hyperparameters(ctx, sims, force_learn);
    return stage_fit(ctx.config, ctx.problem, sims, hyper);
}

SuperSampleSet super_samples(const Context& ctx, const SurrogateState& state, bool force = false) {
    if (!force && stamp_matches(ctx, "herd")) {
        SuperSampleSet set;
        set.samples = table_points(read_csv(ctx.out / "samples_inference.csv"));
        return set;
    }
    SuperSampleSet set = stage_herd(ctx.config, ctx.problem, state);
    std::vector<std::string> names;
    for (const auto& n : ctx.problem.param_names()) names.push_back(ctx.problem.transformed() ? "z_" + n : n);
    write_csv(ctx.out / "samples_inference.csv", points_table(set.samples, names));
    write_csv(ctx.out / "samples.csv",
              points_table(ctx.problem.to_simulator_many(set.samples), ctx.problem.param_names()));
    write_stamp(ctx, "herd", {{"samples", set.size()}});
    std::cerr << "herd: " << set.size() << " super-samples\n";
    return set;
}

int cmd_simulate(const Context& ctx) {
    simulations(ctx, true);
    return exit_ok;
}

int cmd_learn(const Context& ctx) {
    hyperparameters(ctx, simulations(ctx), true);
    return exit_ok;
}

int cmd_fit(const Context& ctx) {
    const SurrogateState state = fitted(ctx);
    const PointSet prior_draws = [&] {
        std::mt19937_64 rng(derive_seed(ctx.config.root_seed, stream_candidates, 1));
        return ctx.problem.to_simulator_many(ctx.problem.sample_inference_prior(1000, rng));
    }();
    write_csv(ctx.out / "density.csv", stage_density(ctx.config, ctx.problem, state, prior_draws));
    write_json(ctx.out / "fit.json", {{"config_hash", ctx.hash},
                                      {"mkml", state.mkml()},
                                      {"solve_residual", state.solve_residual()}});
    std::cerr << "fit: q(y) = " << state.mkml() << "\n";
    return exit_ok;
}

int cmd_herd(const Context& ctx) {
    const SurrogateState state = fitted(ctx);
    super_samples(ctx, state, true);
    return exit_ok;
}

int cmd_eval(const Context& ctx) {
    const SurrogateState state = fitted(ctx);
    const SuperSampleSet set = super_samples(ctx, state);
    const PosteriorEstimates est = stage_estimates(ctx.config, ctx.problem, state, set);
    const Evaluation ev = stage_evaluate(ctx.config, ctx.problem, state, est);
    nlohmann::json j{{"config_hash", ctx.hash}};
    j["mean"] = std::vector<double>(est.mean.data(), est.mean.data() + est.mean.size());
    j["mode"] = std::vector<double>(est.mode.data(), est.mode.data() + est.mode.size());
    j["intervals"] = est.intervals;
    if (ev.tv_to_oracle) j["tv_to_oracle"] = *ev.tv_to_oracle;
    if (ev.nmse_mean) j["nmse_mean"] = *ev.nmse_mean;
    if (ev.nmse_mode) j["nmse_mode"] = *ev.nmse_mode;
    write_json(ctx.out / "evaluation.json", j);
    std::cout << j.dump(2) << "\n";
    return exit_ok;
}

int cmd_surface(const Context& ctx) {
    MkmlObjective objective(simulations(ctx), ctx.problem.observed(), surrogate_prior(ctx.config, ctx.problem));
    const auto& s = ctx.config.surface;
    const MkmlSurface surface =
        mkml_surface(objective, log_grid(s.eps_log_range, s.points), log_grid(s.beta0_log_range, s.points));
    write_csv(ctx.out / "mkml_surface.csv", surface_table(surface));
    const auto [i, j] = surface.argmax();
    std::cerr << "surface: argmax eps " << surface.eps[i] << " beta0 " << surface.beta0[j] << " mkml "
              << surface.values(i, j) << "\n";
    return exit_ok;
}

int cmd_run(const Context& ctx) {
    const RunArtifact artifact = run_experiment(ctx.config, ctx.problem);
    const auto sims = stage_simulate(ctx.config, ctx.problem);
    write_run(ctx.out, artifact, *sims, ctx.problem);
    for (const char* stage : {"simulate", "learn", "herd"}) write_stamp(ctx, stage);
    std::cout << "content_hash " << artifact.content_hash() << "\n";
    if (artifact.evaluation.tv_to_oracle) std::cout << "tv_to_oracle " << *artifact.evaluation.tv_to_oracle << "\n";
    if (artifact.evaluation.nmse_mean) std::cout << "nmse_mean " << *artifact.evaluation.nmse_mean << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel embedding likelihood-free inference driver"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    app.add_option("--config", config_path, "TOML experiment config")->required();
    app.add_option("--seed", seed, "override the root seed");
    app.add_option("--out", out, "override the output directory");

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Context&);
    };
    const Command commands[] = {
        {"simulate", "draw parameters and simulate summaries", cmd_simulate},
        {"learn", "learn (eps, beta0) by MKML, plus ARD when enabled", cmd_learn},
        {"fit", "fit the surrogate and write the posterior density", cmd_fit},
        {"herd", "draw super-samples by kernel herding", cmd_herd},
        {"eval", "posterior estimates and metrics", cmd_eval},
        {"surface", "MKML surface over the configured grid", cmd_surface},
        {"run", "full pipeline", cmd_run},
    };
    for (const auto& c : commands) app.add_subcommand(c.name, c.help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        ExperimentConfig config = load_config(config_path);
        if (seed) config.root_seed = *seed;
        if (!out.empty()) config.output_dir = out;
        config.validate();
        Problem problem = build_problem(config, fs::path(config_path).parent_path());
        Context ctx{config, std::move(problem), fs::path(config.output_dir), config.hash()};
        fs::create_directories(ctx.out);
        for (const auto& c : commands) {
            if (app.got_subcommand(c.name)) return c.run(ctx);
        }
        return exit_other;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const RefusalError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return exit_refusal;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_other;
    }
}
