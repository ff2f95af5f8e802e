#ifndef MIXUP_APP_CONFIG_HPP
#define MIXUP_APP_CONFIG_HPP

#include <json.hpp>

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixup::app {

/// Bad configuration value; carries the offending field name.
struct ConfigError : std::invalid_argument {
    ConfigError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    std::string subcommand;

    // dataset
    std::string dataset = "x3k2";
    int n_per_class = 100;
    double separation = 0.5;
    double noise = 0.1;
    std::string mnist_dir = "data/mnist";
    double fraction = 0.2;
    int n = 20;
    int d = 650;

    // mixing
    std::string mixing = "beta"; // beta | uniform | tabulated
    std::vector<double> alphas{1.0};
    std::string mixing_table;

    // reproducibility and training
    std::uint64_t seed = 0;
    int seeds = 1;
    int epochs = 0;     // 0: 1500 for two moons, 3000 otherwise
    int batch_size = 0; // 0: full batch
    int hidden = 0;     // 0: 500 for two moons, 512 otherwise
    std::string mode = "mixup"; // erm | mixup | both

    std::string output_dir;

    // oracle and assumptions
    std::optional<double> eps;
    bool limit = false;
    std::optional<double> tol_line;
    double delta = 0.25;
    std::vector<std::vector<double>> probes;
    bool grid = false;
    int grid_resolution = 101;
    std::optional<std::array<double, 4>> grid_bounds; // x_min, x_max, y_min, y_max
    bool crossover = false;
    int crossover_class = 1;
    std::uint64_t n_samples = 0; // 0: one epoch
    std::string reference = "train"; // train | test

    // recovery
    int m = 6;
    int dim = 1;
    int trials = 20;
    bool unlabeled = false;
    int rank_trials = 0;
    std::string midpoints_file;

    // linear
    int quadrature_nodes = 64;
    int max_iters = 5000;
    double grad_tol = 1e-9;
    std::string terms = "all"; // all | cross

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {
using nlohmann::json;

template <class T>
void put(json& j, const char* key, const T& v) {
    j[key] = v;
}
template <class T>
void put(json& j, const char* key, const std::optional<T>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <class T>
void get(const json& j, const char* key, T& v) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(v);
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("wrong type (") + e.what() + ")");
    }
}
template <class T>
void get(const json& j, const char* key, std::optional<T>& v) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        v.reset();
        return;
    }
    T tmp{};
    get(j, key, tmp);
    v = tmp;
}

// One list drives both directions so the two cannot drift apart.
template <class Cfg, class F>
void for_each_field(Cfg& c, F&& f) {
    f("subcommand", c.subcommand);
    f("dataset", c.dataset);
    f("n_per_class", c.n_per_class);
    f("separation", c.separation);
    f("noise", c.noise);
    f("mnist_dir", c.mnist_dir);
    f("fraction", c.fraction);
    f("n", c.n);
    f("d", c.d);
    f("mixing", c.mixing);
    f("alphas", c.alphas);
    f("mixing_table", c.mixing_table);
    f("seed", c.seed);
    f("seeds", c.seeds);
    f("epochs", c.epochs);
    f("batch_size", c.batch_size);
    f("hidden", c.hidden);
    f("mode", c.mode);
    f("output_dir", c.output_dir);
    f("eps", c.eps);
    f("limit", c.limit);
    f("tol_line", c.tol_line);
    f("delta", c.delta);
    f("probes", c.probes);
    f("grid", c.grid);
    f("grid_resolution", c.grid_resolution);
    f("grid_bounds", c.grid_bounds);
    f("crossover", c.crossover);
    f("crossover_class", c.crossover_class);
    f("n_samples", c.n_samples);
    f("reference", c.reference);
    f("m", c.m);
    f("dim", c.dim);
    f("trials", c.trials);
    f("unlabeled", c.unlabeled);
    f("rank_trials", c.rank_trials);
    f("midpoints_file", c.midpoints_file);
    f("quadrature_nodes", c.quadrature_nodes);
    f("max_iters", c.max_iters);
    f("grad_tol", c.grad_tol);
    f("terms", c.terms);
}
} // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j = nlohmann::json::object();
    auto copy = c;
    detail::for_each_field(copy, [&](const char* key, const auto& v) { detail::put(j, key, v); });
    return j;
}

/// Applies the keys present in j on top of base. Unknown keys are rejected.
inline ExperimentConfig apply_json(ExperimentConfig base, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config", "top level must be a JSON object");
    std::set<std::string> known;
    detail::for_each_field(base, [&](const char* key, auto&) { known.insert(key); });
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError(key, "unknown field");
    detail::for_each_field(base, [&](const char* key, auto& v) { detail::get(j, key, v); });
    return base;
}

inline ExperimentConfig from_json(const nlohmann::json& j) { return apply_json(ExperimentConfig{}, j); }

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON in ") + path + ": " + e.what());
    }
}

inline void validate(const ExperimentConfig& c) {
    static const std::set<std::string> subcommands{"oracle", "train", "recover", "assumptions", "linear"};
    if (!subcommands.count(c.subcommand)) throw ConfigError("subcommand", "unknown subcommand '" + c.subcommand + "'");
    if (c.mixing != "beta" && c.mixing != "uniform" && c.mixing != "tabulated")
        throw ConfigError("mixing", "expected beta, uniform or tabulated");
    if (c.mixing == "beta") {
        if (c.alphas.empty()) throw ConfigError("alphas", "at least one alpha is required");
        for (double a : c.alphas)
            if (!(a > 0.0)) throw ConfigError("alphas", "alpha must be positive");
    }
    if (c.mixing == "tabulated" && c.mixing_table.empty()) throw ConfigError("mixing_table", "path required");
    if (c.mode != "erm" && c.mode != "mixup" && c.mode != "both") throw ConfigError("mode", "expected erm, mixup or both");
    if (c.seeds < 1) throw ConfigError("seeds", "must be >= 1");
    if (c.epochs < 0) throw ConfigError("epochs", "must be >= 0");
    if (c.batch_size < 0) throw ConfigError("batch_size", "must be >= 0");
    if (c.hidden < 0) throw ConfigError("hidden", "must be >= 0");
    if (c.eps && !(*c.eps > 0.0)) throw ConfigError("eps", "must be positive");
    if (c.tol_line && !(*c.tol_line >= 0.0)) throw ConfigError("tol_line", "must be nonnegative");
    if (!(c.delta > 0.0 && c.delta < 0.5)) throw ConfigError("delta", "must lie in (0, 1/2)");
    if (c.subcommand == "oracle" && !c.limit && !c.eps) throw ConfigError("eps", "required unless --limit is given");
    if (c.grid_resolution < 1) throw ConfigError("grid_resolution", "must be >= 1");
    if (c.fraction <= 0.0 || c.fraction > 1.0) throw ConfigError("fraction", "must lie in (0, 1]");
    if (c.reference != "train" && c.reference != "test") throw ConfigError("reference", "expected train or test");
    if (c.m < 2) throw ConfigError("m", "must be >= 2");
    if (c.dim < 1) throw ConfigError("dim", "must be >= 1");
    if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
    if (c.rank_trials < 0) throw ConfigError("rank_trials", "must be >= 0");
    if (c.n < 2) throw ConfigError("n", "must be >= 2");
    if (c.d < 1) throw ConfigError("d", "must be >= 1");
    if (c.quadrature_nodes < 16) throw ConfigError("quadrature_nodes", "must be >= 16");
    if (c.max_iters < 1) throw ConfigError("max_iters", "must be >= 1");
    if (!(c.grad_tol > 0.0)) throw ConfigError("grad_tol", "must be positive");
    if (c.terms != "all" && c.terms != "cross") throw ConfigError("terms", "expected all or cross");
    if (c.n_per_class < 1) throw ConfigError("n_per_class", "must be >= 1");
    if (c.noise < 0.0) throw ConfigError("noise", "must be >= 0");
}

} // namespace mixup::app

#endif // MIXUP_APP_CONFIG_HPP
