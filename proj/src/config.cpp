#include "kelfi/config.hpp"

#include "kelfi/errors.hpp"
#include "kelfi/io.hpp"

#include <toml.hpp>

#include <algorithm>
#include <set>

namespace kelfi {

namespace {

// Reads typed keys from one TOML table and remembers which were consumed, so
// leftovers can be reported as unknown.
class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    bool present() const { return table_ != nullptr; }

    const toml::node* get(const std::string& key) {
        if (!table_) return nullptr;
        used_.insert(key);
        return table_->get(key);
    }

    void read(const std::string& key, double& out) {
        if (const auto* n = get(key)) out = as_double(*n, key);
    }

    void read(const std::string& key, bool& out) {
        if (const auto* n = get(key)) {
            if (!n->is_boolean()) fail(key, "expected a boolean");
            out = *n->value<bool>();
        }
    }

    void read(const std::string& key, std::string& out) {
        if (const auto* n = get(key)) {
            if (!n->is_string()) fail(key, "expected a string");
            out = *n->value<std::string>();
        }
    }

    void read(const std::string& key, std::size_t& out) {
        if (const auto* n = get(key)) out = static_cast<std::size_t>(as_nonnegative(*n, key));
    }

    void read_seed(const std::string& key, std::uint64_t& out) {
        if (const auto* n = get(key)) out = static_cast<std::uint64_t>(as_nonnegative(*n, key));
    }

    void read(const std::string& key, std::pair<double, double>& out) {
        if (const auto* n = get(key)) {
            const auto v = as_doubles(*n, key);
            if (v.size() != 2) fail(key, "expected [lo, hi]");
            out = {v[0], v[1]};
        }
    }

    void read(const std::string& key, Vector& out) {
        if (const auto* n = get(key)) {
            const auto v = as_doubles(*n, key);
            out = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
    }

    void read(const std::string& key, std::vector<std::pair<double, double>>& out) {
        if (const auto* n = get(key)) {
            const auto* arr = n->as_array();
            if (!arr) fail(key, "expected an array of [lo, hi] pairs");
            out.clear();
            for (const auto& item : *arr) {
                const auto v = as_doubles(item, key);
                if (v.size() != 2) fail(key, "expected an array of [lo, hi] pairs");
                out.emplace_back(v[0], v[1]);
            }
        }
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_) {
            const std::string key(k.str());
            if (!used_.count(key)) {
                throw ConfigError("unknown key '" + key + "'" + (name_.empty() ? "" : " in [" + name_ + "]"));
            }
        }
    }

private:
    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError((name_.empty() ? key : name_ + "." + key) + ": " + what);
    }

    double as_double(const toml::node& n, const std::string& key) const {
        if (n.is_floating_point()) return *n.value<double>();
        if (n.is_integer()) return static_cast<double>(*n.value<std::int64_t>());
        fail(key, "expected a number");
    }

    std::int64_t as_nonnegative(const toml::node& n, const std::string& key) const {
        if (!n.is_integer()) fail(key, "expected an integer");
        const auto v = *n.value<std::int64_t>();
        if (v < 0) fail(key, "must be non-negative");
        return v;
    }

    std::vector<double> as_doubles(const toml::node& n, const std::string& key) const {
        const auto* arr = n.as_array();
        if (!arr) fail(key, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& item : *arr) out.push_back(as_double(item, key));
        return out;
    }

    const toml::table* table_;
    std::string name_;
    std::set<std::string> used_;
};

Section section(Section& root, const std::string& name) {
    const toml::node* n = root.get(name);
    if (n && !n->is_table()) throw ConfigError("[" + name + "] must be a table");
    return Section(n ? n->as_table() : nullptr, name);
}

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json range_json(const std::pair<double, double>& r) { return {r.first, r.second}; }

}  // namespace

const std::vector<std::string>& problem_ids() {
    static const std::vector<std::string> ids = {"toy", "blowfly", "lotka_volterra"};
    return ids;
}

void ExperimentConfig::validate() const {
    if (std::find(problem_ids().begin(), problem_ids().end(), problem) == problem_ids().end()) {
        throw ConfigError("problem must be one of toy, blowfly, lotka_volterra (got '" + problem + "')");
    }
    if (m < 1) throw ConfigError("m must be at least 1");
    learning.validate();
    if (herding.samples < 1) throw ConfigError("herding.samples must be at least 1");
    if (herding.candidate_count() < 1) throw ConfigError("herding.candidates must be at least 1");
    if (embedding.monte_carlo && embedding.samples < 1) throw ConfigError("embedding.samples must be at least 1");
    if (evaluation.n_eval < 1 || evaluation.baseline_count < 1) {
        throw ConfigError("evaluation counts must be at least 1");
    }
    if (evaluation.density_resolution < 1) throw ConfigError("evaluation.density_resolution must be at least 1");
    if (!(evaluation.interval_level > 0.0 && evaluation.interval_level < 1.0)) {
        throw ConfigError("evaluation.interval_level must lie in (0, 1)");
    }
    for (const auto& [lo, hi] : evaluation.density_range) {
        if (!(lo < hi)) throw ConfigError("evaluation.density_range entries need lo < hi");
    }
    if (!(surface.eps_log_range.first < surface.eps_log_range.second) ||
        !(surface.beta0_log_range.first < surface.beta0_log_range.second) || surface.points < 1) {
        throw ConfigError("surface: ranges need lo < hi and points >= 1");
    }
    if (problem == "toy") {
        if (!(toy.a > 0.0) || !(toy.b > 0.0)) throw ConfigError("prior.a and prior.b must be positive");
        if (toy.n < 1) throw ConfigError("simulator.n must be at least 1");
        if (!(toy.theta_true > 0.0)) throw ConfigError("simulator.theta_true must be positive");
        if (!(toy.noise_scale > 0.0)) throw ConfigError("simulator.noise_scale must be positive");
    } else if (problem == "blowfly") {
        const auto& b = blowfly;
        if (b.simulation.length < 8) throw ConfigError("simulator.length must be at least 8");
        if (b.summaries.smoothing_window < 1) throw ConfigError("simulator.smoothing_window must be at least 1");
        if (b.prior_mean.size() && b.prior_mean.size() != 6) throw ConfigError("prior.mean needs six entries");
        if (b.prior_stddev.size() && (b.prior_stddev.size() != 6 || !(b.prior_stddev.array() > 0.0).all())) {
            throw ConfigError("prior.stddev needs six positive entries");
        }
        if (b.truth.size() && b.truth.size() != 6) throw ConfigError("simulator.truth needs six entries");
    } else {
        const auto& l = lotka_volterra;
        if (!(l.prior_lo < l.prior_hi)) throw ConfigError("prior.lo must be below prior.hi");
        if (!(l.simulation.record_dt > 0.0) || !(l.simulation.t_end >= 2.0 * l.simulation.record_dt)) {
            throw ConfigError("simulator: need record_dt > 0 and at least three recorded points");
        }
        if (l.simulation.max_events < 1) throw ConfigError("simulator.max_events must be at least 1");
        if (l.truth.size() && l.truth.size() != 4) throw ConfigError("simulator.truth needs four entries");
        if (!l.normalization && normalization_file.empty() && l.pilot_count < 2) {
            throw ConfigError("simulator.pilot_count must be at least 2");
        }
        if (!(l.log_variance_guard > 0.0)) throw ConfigError("simulator.log_variance_guard must be positive");
    }
}

ExperimentConfig parse_config(const std::string& toml_text) {
    toml::table table;
    try {
        table = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
    }

    ExperimentConfig c;
    Section root(&table, "");
    root.read("problem", c.problem);
    root.read("m", c.m);
    root.read("output_dir", c.output_dir);
    if (std::find(problem_ids().begin(), problem_ids().end(), c.problem) == problem_ids().end()) {
        throw ConfigError("problem must be one of toy, blowfly, lotka_volterra (got '" + c.problem + "')");
    }

    Section seeds = section(root, "seeds");
    std::uint64_t observation = 0;
    std::uint64_t pilot = 0;
    seeds.read_seed("root", c.root_seed);
    seeds.read_seed("observation", observation);
    if (c.problem == "lotka_volterra") seeds.read_seed("pilot", pilot);
    seeds.finish();
    c.toy.observation_seed = observation;
    c.blowfly.observation_seed = observation;
    c.lotka_volterra.observation_seed = observation;
    c.lotka_volterra.pilot_seed = pilot;

    Section prior = section(root, "prior");
    Section sim = section(root, "simulator");
    if (c.problem == "toy") {
        prior.read("a", c.toy.a);
        prior.read("b", c.toy.b);
        sim.read("n", c.toy.n);
        sim.read("theta_true", c.toy.theta_true);
        sim.read("noise_statistic", c.toy.noise_statistic);
        sim.read("noise_scale", c.toy.noise_scale);
    } else if (c.problem == "blowfly") {
        prior.read("mean", c.blowfly.prior_mean);
        prior.read("stddev", c.blowfly.prior_stddev);
        auto& b = c.blowfly;
        sim.read("length", b.simulation.length);
        sim.read("burn_in", b.simulation.burn_in);
        sim.read("initial_population", b.simulation.initial_population);
        sim.read("max_population", b.simulation.max_population);
        sim.read("smoothing_window", b.summaries.smoothing_window);
        sim.read("threshold_low", b.summaries.threshold_low);
        sim.read("threshold_high", b.summaries.threshold_high);
        sim.read("truth", b.truth);
    } else {
        auto& l = c.lotka_volterra;
        prior.read("lo", l.prior_lo);
        prior.read("hi", l.prior_hi);
        sim.read("predators0", l.simulation.predators0);
        sim.read("prey0", l.simulation.prey0);
        sim.read("t_end", l.simulation.t_end);
        sim.read("record_dt", l.simulation.record_dt);
        sim.read("max_events", l.simulation.max_events);
        sim.read("max_population", l.simulation.max_population);
        sim.read("truth", l.truth);
        sim.read("pilot_count", l.pilot_count);
        sim.read("log_variance_guard", l.log_variance_guard);
        sim.read("normalization_file", c.normalization_file);
        Vector mean;
        Vector stddev;
        sim.read("pilot_mean", mean);
        sim.read("pilot_stddev", stddev);
        if (mean.size() || stddev.size()) {
            if (mean.size() != 9 || stddev.size() != 9 || !(stddev.array() > 0.0).all()) {
                throw ConfigError("simulator.pilot_mean and pilot_stddev need nine entries, stddevs positive");
            }
            l.normalization = LvNormalization{mean, stddev};
        }
    }
    prior.finish();
    sim.finish();

    Section learning = section(root, "learning");
    learning.read("eps_log_range", c.learning.eps_log_range);
    learning.read("beta0_log_range", c.learning.beta0_log_range);
    learning.read("grid_points", c.learning.grid_points);
    learning.read("local_steps", c.learning.local_steps);
    learning.read("step_tolerance", c.learning.step_tolerance);
    learning.read("ard", c.ard);
    learning.read("ard_sweeps", c.ard_sweeps);
    learning.finish();
    c.learning.seed = c.root_seed;

    Section embedding = section(root, "embedding");
    std::string mode = "closed_form";
    embedding.read("mode", mode);
    embedding.read("samples", c.embedding.samples);
    embedding.finish();
    if (mode != "closed_form" && mode != "monte_carlo") {
        throw ConfigError("embedding.mode must be closed_form or monte_carlo");
    }
    c.embedding.monte_carlo = mode == "monte_carlo";

    Section herding = section(root, "herding");
    herding.read("samples", c.herding.samples);
    herding.read("candidates", c.herding.candidates);
    herding.finish();

    Section eval = section(root, "evaluation");
    eval.read("nmse", c.evaluation.nmse);
    eval.read("n_eval", c.evaluation.n_eval);
    eval.read("baseline_count", c.evaluation.baseline_count);
    eval.read("density_resolution", c.evaluation.density_resolution);
    eval.read("density_range", c.evaluation.density_range);
    eval.read("mode_restarts", c.evaluation.mode_restarts);
    eval.read("interval_level", c.evaluation.interval_level);
    eval.finish();

    Section surface = section(root, "surface");
    surface.read("eps_log_range", c.surface.eps_log_range);
    surface.read("beta0_log_range", c.surface.beta0_log_range);
    surface.read("points", c.surface.points);
    surface.finish();

    root.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const IoError&) {
        throw ConfigError("cannot read config file " + path.string());
    }
    return parse_config(text);
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["problem"] = problem;
    j["m"] = m;
    j["seeds"] = {{"root", root_seed}, {"observation", toy.observation_seed}};
    if (problem == "toy") {
        j["prior"] = {{"a", toy.a}, {"b", toy.b}};
        j["simulator"] = {{"n", toy.n},
                          {"theta_true", toy.theta_true},
                          {"noise_statistic", toy.noise_statistic},
                          {"noise_scale", toy.noise_scale}};
    } else if (problem == "blowfly") {
        const auto& b = blowfly;
        j["prior"] = {{"mean", vec_json(b.prior_mean.size() ? b.prior_mean : blowfly_default_prior_mean())},
                      {"stddev", vec_json(b.prior_stddev.size() ? b.prior_stddev : blowfly_default_prior_stddev())}};
        j["simulator"] = {{"length", b.simulation.length},
                          {"burn_in", b.simulation.burn_in},
                          {"initial_population", b.simulation.initial_population},
                          {"max_population", b.simulation.max_population},
                          {"smoothing_window", b.summaries.smoothing_window},
                          {"threshold_low", b.summaries.threshold_low},
                          {"threshold_high", b.summaries.threshold_high},
                          {"truth", vec_json(b.truth.size() ? b.truth
                                                            : (b.prior_mean.size() ? b.prior_mean
                                                                                   : blowfly_default_prior_mean()))}};
    } else {
        const auto& l = lotka_volterra;
        j["seeds"]["pilot"] = l.pilot_seed;
        j["prior"] = {{"lo", l.prior_lo}, {"hi", l.prior_hi}};
        j["simulator"] = {{"predators0", l.simulation.predators0},
                          {"prey0", l.simulation.prey0},
                          {"t_end", l.simulation.t_end},
                          {"record_dt", l.simulation.record_dt},
                          {"max_events", l.simulation.max_events},
                          {"max_population", l.simulation.max_population},
                          {"truth", vec_json(l.truth.size() ? l.truth : lv_default_truth())},
                          {"pilot_count", l.pilot_count},
                          {"log_variance_guard", l.log_variance_guard},
                          {"normalization_file", normalization_file}};
        if (l.normalization) {
            j["simulator"]["pilot_mean"] = vec_json(l.normalization->mean);
            j["simulator"]["pilot_stddev"] = vec_json(l.normalization->stddev);
        }
    }
    j["learning"] = {{"eps_log_range", range_json(learning.eps_log_range)},
                     {"beta0_log_range", range_json(learning.beta0_log_range)},
                     {"grid_points", learning.grid_points},
                     {"local_steps", learning.local_steps},
                     {"step_tolerance", learning.step_tolerance},
                     {"ard", ard},
                     {"ard_sweeps", ard_sweeps}};
    j["embedding"] = {{"mode", embedding.monte_carlo ? "monte_carlo" : "closed_form"},
                      {"samples", embedding.samples}};
    j["herding"] = {{"samples", herding.samples}, {"candidates", herding.candidate_count()}};
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& r : evaluation.density_range) ranges.push_back(range_json(r));
    j["evaluation"] = {{"nmse", evaluation.nmse},
                       {"n_eval", evaluation.n_eval},
                       {"baseline_count", evaluation.baseline_count},
                       {"density_resolution", evaluation.density_resolution},
                       {"density_range", ranges},
                       {"mode_restarts", evaluation.mode_restarts},
                       {"interval_level", evaluation.interval_level}};
    j["surface"] = {{"eps_log_range", range_json(surface.eps_log_range)},
                    {"beta0_log_range", range_json(surface.beta0_log_range)},
                    {"points", surface.points}};
    return j;
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_json().dump()); }

Problem build_problem(const ExperimentConfig& c, const std::filesystem::path& base_dir) {
    c.validate();
    if (c.problem == "toy") return make_toy(c.toy);
    if (c.problem == "blowfly") return make_blowfly(c.blowfly);
    LotkaVolterraOptions options = c.lotka_volterra;
    if (!options.normalization && !c.normalization_file.empty()) {
        std::filesystem::path path(c.normalization_file);
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        options.normalization = lv_normalization_from_json(read_json(path));
    }
    return make_lotka_volterra(options);
}

}  // namespace kelfi
