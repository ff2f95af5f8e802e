#include <CLI11.hpp>

#include "mixup/app/commands.hpp"

#include <iostream>
#include <sstream>

namespace {

using mixup::app::ConfigError;
using mixup::app::ExperimentConfig;

std::vector<double> parse_list(const std::string& field, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(field, "cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw ConfigError(field, "empty list");
    return out;
}

struct Raw {
    std::string alphas;
    std::vector<std::string> probes;
    std::string grid_bounds;
    std::optional<double> eps;
    std::optional<double> tol_line;
    std::string config_file;
};

void add_dataset_options(CLI::App* app, ExperimentConfig& c) {
    app->add_option("--dataset", c.dataset, "x<m>k<k>, cross, moons, gaussian, csv:<path> or mnist");
    app->add_option("--n-per-class", c.n_per_class, "two moons: points per class");
    app->add_option("--sep", c.separation, "two moons: vertical separation");
    app->add_option("--noise", c.noise, "two moons: Gaussian noise standard deviation");
    app->add_option("--mnist-dir", c.mnist_dir, "directory with the IDX files");
    app->add_option("--fraction", c.fraction, "fraction of the IDX data to keep");
    app->add_option("--n", c.n, "gaussian: number of points");
    app->add_option("--d", c.d, "gaussian: dimension");
}

void add_mixing_options(CLI::App* app, ExperimentConfig& c, Raw& raw) {
    app->add_option("--mixing", c.mixing, "beta, uniform or tabulated");
    app->add_option("--alpha", raw.alphas, "Beta(alpha, alpha) parameter(s), comma separated");
    app->add_option("--mixing-table", c.mixing_table, "CSV with lambda,density for tabulated mixing");
}

void add_common_options(CLI::App* app, ExperimentConfig& c, Raw& raw) {
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--out", c.output_dir, "output directory (default $MIXUP_OUTPUT_ROOT/<subcommand>)");
    app->add_option("--config", raw.config_file, "JSON config; its fields override flags");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixup experiments: optimal classifiers, training, recovery and linear models"};
    app.require_subcommand(1);
    ExperimentConfig c;
    Raw raw;

    auto* oracle = app.add_subcommand("oracle", "Mixup-optimal classifier at probes or on a grid");
    add_dataset_options(oracle, c);
    add_mixing_options(oracle, c, raw);
    add_common_options(oracle, c, raw);
    oracle->add_option("--eps", raw.eps, "neighbourhood radius");
    oracle->add_flag("--limit", c.limit, "use the eps -> 0 limit classifier");
    oracle->add_option("--tol-line", raw.tol_line, "through-probe tolerance for the limit classifier");
    oracle->add_option("--probe", raw.probes, "probe point, comma separated coordinates (repeatable)");
    oracle->add_flag("--grid", c.grid, "evaluate on a grid and plot (2-D datasets)");
    oracle->add_option("--grid-resolution", c.grid_resolution, "cells per axis");
    oracle->add_option("--grid-bounds", raw.grid_bounds, "x_min,x_max,y_min,y_max");
    oracle->add_flag("--crossover", c.crossover, "bisect alpha for the 1/2 crossing at each probe");
    oracle->add_option("--crossover-class", c.crossover_class, "class whose probability is bisected");

    auto* train = app.add_subcommand("train", "Train MLPs with ERM and/or Mixup");
    add_dataset_options(train, c);
    add_mixing_options(train, c, raw);
    add_common_options(train, c, raw);
    train->add_option("--mode", c.mode, "erm, mixup or both");
    train->add_option("--seeds", c.seeds, "number of runs per configuration");
    train->add_option("--epochs", c.epochs, "epochs (default 1500 for moons, 3000 otherwise)");
    train->add_option("--batch-size", c.batch_size, "0 for full batch");
    train->add_option("--hidden", c.hidden, "hidden units (default 500 for moons, 512 otherwise)");
    train->add_option("--grid-resolution", c.grid_resolution, "boundary plot cells per axis");
    train->add_option("--grid-bounds", raw.grid_bounds, "x_min,x_max,y_min,y_max");

    auto* recover = app.add_subcommand("recover", "Recover points from their pairwise midpoints");
    add_common_options(recover, c, raw);
    recover->add_option("--m", c.m, "number of points");
    recover->add_option("--dim", c.dim, "dimension");
    recover->add_option("--trials", c.trials, "random round-trip trials");
    recover->add_flag("--unlabeled", c.unlabeled, "also recover from the unlabeled midpoint multiset (1-D)");
    recover->add_option("--rank-trials", c.rank_trials, "random row permutations for the rank certificate");
    recover->add_option("--midpoints", c.midpoints_file, "read midpoints from CSV instead of sampling");

    auto* assume = app.add_subcommand("assumptions", "Check the no-collinearity and margin conditions");
    add_dataset_options(assume, c);
    add_mixing_options(assume, c, raw);
    add_common_options(assume, c, raw);
    assume->add_option("--samples", c.n_samples, "Mixup samples (default: one epoch)");
    assume->add_option("--reference", c.reference, "train or test");
    assume->add_option("--tol-line", raw.tol_line, "collinearity tolerance");
    assume->add_option("--probe", raw.probes, "probe point for the pointwise margin check (repeatable)");
    assume->add_option("--eps", raw.eps, "radius for the pointwise margin check");
    assume->add_option("--delta", c.delta, "end-proximity parameter in (0, 1/2)");

    auto* lin = app.add_subcommand("linear", "Linear Mixup vs max-margin on Gaussian data");
    add_mixing_options(lin, c, raw);
    add_common_options(lin, c, raw);
    lin->add_option("--n", c.n, "number of points");
    lin->add_option("--d", c.d, "dimension");
    lin->add_option("--trials", c.trials, "independent datasets");
    lin->add_option("--nodes", c.quadrature_nodes, "quadrature nodes");
    lin->add_option("--max-iters", c.max_iters, "gradient descent iterations");
    lin->add_option("--grad-tol", c.grad_tol, "gradient norm tolerance");
    lin->add_option("--terms", c.terms, "all or cross");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mixup::app::exit_config;
    }

    try {
        c.subcommand = app.get_subcommands().front()->get_name();
        if (!raw.alphas.empty()) c.alphas = parse_list("alphas", raw.alphas);
        for (const auto& p : raw.probes) c.probes.push_back(parse_list("probes", p));
        if (!raw.grid_bounds.empty()) {
            const auto b = parse_list("grid_bounds", raw.grid_bounds);
            if (b.size() != 4) throw ConfigError("grid_bounds", "expected four numbers");
            c.grid_bounds = std::array<double, 4>{b[0], b[1], b[2], b[3]};
        }
        if (raw.eps) c.eps = raw.eps;
        if (raw.tol_line) c.tol_line = raw.tol_line;
        if (!raw.config_file.empty()) {
            const std::string sub = c.subcommand;
            c = mixup::app::apply_json(c, mixup::app::load_json_file(raw.config_file));
            if (c.subcommand != sub) throw ConfigError("subcommand", "config is for '" + c.subcommand + "', not '" + sub + "'");
        }
        return mixup::app::dispatch(c);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return mixup::app::exit_config;
    } catch (const mixup::ContractError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return mixup::app::exit_config;
    } catch (const mixup::DatasetError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return mixup::app::exit_config;
    } catch (const mixup::InvalidDistribution& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return mixup::app::exit_config;
    } catch (const mixup::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return mixup::app::exit_config;
    } catch (const mixup::FormatError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return mixup::app::exit_config;
    } catch (const mixup::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return mixup::app::exit_numeric;
    } catch (const mixup::OutsideMixSupport& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return mixup::app::exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
