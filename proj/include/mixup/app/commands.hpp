#ifndef MIXUP_APP_COMMANDS_HPP
#define MIXUP_APP_COMMANDS_HPP

#include "../assumptions.hpp"
#include "../datasets.hpp"
#include "../linear.hpp"
#include "../mixing.hpp"
#include "../oracle.hpp"
#include "../recovery.hpp"
#include "../training.hpp"
#include "config.hpp"
#include "output.hpp"
#include "parallel.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace mixup::app {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_numeric = 3;

inline bool is_moons(const ExperimentConfig& c) { return c.dataset == "moons"; }

inline LabeledDataset make_dataset(const ExperimentConfig& c, std::uint64_t seed) {
    static const std::regex line_re(R"(x(\d+)k(\d+))");
    std::smatch mt;
    try {
        if (std::regex_match(c.dataset, mt, line_re))
            return datasets::alternating_line(std::stoi(mt[1]), std::stoi(mt[2]));
        if (c.dataset == "cross") return datasets::four_point_cross();
        if (c.dataset == "moons") return datasets::two_moons(c.n_per_class, c.separation, c.noise, seed);
        if (c.dataset == "gaussian") return datasets::gaussian_binary(c.n, c.d, seed);
        if (c.dataset.rfind("csv:", 0) == 0) return datasets::load_csv(c.dataset.substr(4));
        if (c.dataset == "mnist") {
            const fs::path dir(c.mnist_dir);
            return datasets::load_idx((dir / "train-images-idx3-ubyte").string(),
                                      (dir / "train-labels-idx1-ubyte").string(), c.fraction, seed);
        }
    } catch (const DatasetError& e) {
        throw ConfigError("dataset", e.what());
    }
    throw ConfigError("dataset", "unknown dataset '" + c.dataset + "' (x<m>k<k>, cross, moons, gaussian, csv:<path>, mnist)");
}

struct NamedMixing {
    std::string label; // alpha value, or the distribution kind
    double alpha;      // NaN for non-Beta
    MixingDistribution dist;
};

inline std::vector<NamedMixing> make_mixings(const ExperimentConfig& c) {
    std::vector<NamedMixing> out;
    try {
        if (c.mixing == "uniform") {
            out.push_back({"uniform", 1.0, MixingDistribution::uniform()});
        } else if (c.mixing == "tabulated") {
            out.push_back({"tabulated", std::nan(""), MixingDistribution::from_csv(c.mixing_table)});
        } else {
            for (double a : c.alphas) out.push_back({fmt(a), a, MixingDistribution::beta(a)});
        }
    } catch (const InvalidDistribution& e) {
        throw ConfigError(c.mixing == "tabulated" ? "mixing_table" : "alphas", e.what());
    } catch (const ParseError& e) {
        throw ConfigError("mixing_table", e.what());
    }
    return out;
}

inline fs::path output_dir(const ExperimentConfig& c) {
    fs::path dir;
    if (!c.output_dir.empty()) {
        dir = c.output_dir;
    } else {
        const char* root = std::getenv("MIXUP_OUTPUT_ROOT");
        dir = fs::path(root && *root ? root : "runs") / c.subcommand;
    }
    fs::create_directories(dir);
    return dir;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::vector<std::string> probs_cells(const std::vector<double>& p, int k) {
    std::vector<std::string> out;
    for (int i = 0; i < k; ++i) out.push_back(i < static_cast<int>(p.size()) ? fmt(p[static_cast<std::size_t>(i)]) : "");
    return out;
}

inline std::vector<std::string> prob_headers(int k) {
    std::vector<std::string> h;
    for (int i = 1; i <= k; ++i) h.push_back("p" + std::to_string(i));
    return h;
}

inline oracle::GridSpec default_grid(const ExperimentConfig& c, const LabeledDataset& ds) {
    oracle::GridSpec g;
    g.nx = g.ny = c.grid_resolution;
    if (c.grid_bounds) {
        const auto& b = *c.grid_bounds;
        g.x_min = b[0], g.x_max = b[1], g.y_min = b[2], g.y_max = b[3];
        return g;
    }
    const auto lo = ds.points().colwise().minCoeff();
    const auto hi = ds.points().colwise().maxCoeff();
    g.x_min = lo(0) - 0.5, g.x_max = hi(0) + 0.5;
    g.y_min = lo(1) - 0.5, g.y_max = hi(1) + 0.5;
    return g;
}

/// Heatmap of per-cell labels with the data points on top.
inline std::string label_heatmap_svg(const LabeledDataset& ds, const oracle::GridSpec& g, const std::vector<int>& labels,
                                     const std::string& title) {
    SvgCanvas svg(g.x_min, g.x_max, g.y_min, g.y_max);
    const double dx = g.nx > 1 ? (g.x_max - g.x_min) / (g.nx - 1) : g.x_max - g.x_min;
    const double dy = g.ny > 1 ? (g.y_max - g.y_min) / (g.ny - 1) : g.y_max - g.y_min;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = std::clamp(g.x_at(i) - dx / 2, g.x_min, g.x_max);
            const double y = std::clamp(g.y_at(j) - dy / 2, g.y_min, g.y_max);
            const double x2 = std::clamp(g.x_at(i) + dx / 2, g.x_min, g.x_max);
            const double y2 = std::clamp(g.y_at(j) + dy / 2, g.y_min, g.y_max);
            svg.rect(x, y, x2 - x, y2 - y, class_color(labels[static_cast<std::size_t>(j * g.nx + i)]), 0.45);
        }
    for (std::size_t p = 0; p < ds.size(); ++p) svg.circle(ds.points()(static_cast<Eigen::Index>(p), 0), ds.points()(static_cast<Eigen::Index>(p), 1), 3.0, class_color(ds.label(p)));
    svg.frame();
    svg.text(SvgCanvas::margin, 24, title, 14);
    return svg.str();
}

/// Marching-squares segments of the level set {field = level} on a grid.
inline std::vector<std::array<double, 4>> contour_segments(const oracle::GridSpec& g, const std::vector<double>& field,
                                                           double level) {
    std::vector<std::array<double, 4>> segs;
    const auto v = [&](int i, int j) { return field[static_cast<std::size_t>(j * g.nx + i)] - level; };
    const auto interp = [](double a, double b, double fa, double fb) { return a + (b - a) * fa / (fa - fb); };
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i + 1 < g.nx; ++i) {
            const double x0 = g.x_at(i), x1 = g.x_at(i + 1), y0 = g.y_at(j), y1 = g.y_at(j + 1);
            const double f00 = v(i, j), f10 = v(i + 1, j), f01 = v(i, j + 1), f11 = v(i + 1, j + 1);
            std::vector<std::pair<double, double>> pts;
            if ((f00 > 0) != (f10 > 0)) pts.emplace_back(interp(x0, x1, f00, f10), y0);
            if ((f10 > 0) != (f11 > 0)) pts.emplace_back(x1, interp(y0, y1, f10, f11));
            if ((f01 > 0) != (f11 > 0)) pts.emplace_back(interp(x0, x1, f01, f11), y1);
            if ((f00 > 0) != (f01 > 0)) pts.emplace_back(x0, interp(y0, y1, f00, f01));
            for (std::size_t s = 0; s + 1 < pts.size(); s += 2)
                segs.push_back({pts[s].first, pts[s].second, pts[s + 1].first, pts[s + 1].second});
        }
    return segs;
}

// oracle

inline int run_oracle(const ExperimentConfig& c) {
    const auto ds = make_dataset(c, c.seed);
    const auto mixings = make_mixings(c);
    const auto dir = output_dir(c);
    write_json(dir / "config.json", to_json(c));
    const int k = ds.num_classes();

    std::vector<Vector> probes;
    for (const auto& p : c.probes) {
        if (p.size() != ds.dim())
            throw ConfigError("probes", "probe has " + std::to_string(p.size()) + " coordinates, dataset has " +
                                            std::to_string(ds.dim()));
        probes.push_back(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
    }
    if (probes.empty() && !c.grid)
        for (std::size_t i = 0; i < ds.size(); ++i) probes.push_back(ds.point(i).transpose());

    std::vector<std::string> header{"alpha", "mode", "eps"};
    for (std::size_t d = 0; d < ds.dim(); ++d) header.push_back("x" + std::to_string(d));
    header.insert(header.end(), {"defined", "predicted"});
    for (const auto& h : prob_headers(k)) header.push_back(h);
    CsvWriter csv(dir / "results.csv", header);

    json summary{{"dataset", ds.name()}, {"points", ds.size()}, {"classes", k}, {"mode", c.limit ? "limit" : "epsilon"}};
    json runs = json::array();
    for (const auto& mx : mixings) {
        if (c.limit) require_oracle_support(mx.dist);
        json run{{"mixing", mx.dist.describe()}, {"alpha", mx.label}};
        std::size_t defined = 0;
        json probe_out = json::array();
        for (const auto& x : probes) {
            std::optional<ClassProbs> p;
            if (c.limit) {
                p = oracle::h_limit(ds, mx.dist, x, c.tol_line);
            } else {
                const auto t = oracle::xi_table(ds, mx.dist, x, *c.eps);
                if (t.in_xmix) p = oracle::normalize(oracle::optimal_coefficients(t.xi, t.xi_lambda));
            }
            std::vector<std::string> row{mx.label, c.limit ? "limit" : "epsilon", c.limit ? "" : fmt(*c.eps)};
            for (Eigen::Index d = 0; d < x.size(); ++d) row.push_back(fmt(x(d)));
            row.push_back(p ? "1" : "0");
            row.push_back(p ? std::to_string(p->predicted_class()) : "0");
            for (const auto& s : probs_cells(p ? p->probs : std::vector<double>{}, k)) row.push_back(s);
            csv.row(row);
            defined += p ? 1 : 0;
            probe_out.push_back(p ? json(p->probs) : json(nullptr));
        }
        run["defined_probes"] = defined;
        run["probabilities"] = probe_out;
        runs.push_back(run);
    }
    summary["runs"] = runs;

    if (c.crossover) {
        if (!c.eps) throw ConfigError("eps", "crossover needs a fixed eps");
        const double hi = std::ceil(alpha_threshold(*c.eps)) + 1.0;
        json cross = json::array();
        for (const auto& x : probes) {
            try {
                cross.push_back(oracle::alpha_crossover(ds, x, c.crossover_class, *c.eps, 1.0, hi));
            } catch (const NumericError&) {
                cross.push_back(nullptr);
            }
        }
        summary["alpha_crossover"] = cross;
        summary["alpha_bracket"] = {1.0, hi};
    }

    if (c.grid) {
        if (ds.dim() != 2) throw ConfigError("grid", "grid evaluation needs a 2-D dataset");
        const auto g = default_grid(c, ds);
        const auto& mx = mixings.front();
        const oracle::OracleMode mode =
            c.limit ? oracle::OracleMode{oracle::LimitMode{c.tol_line}} : oracle::OracleMode{oracle::EpsilonMode{*c.eps}};
        const auto grid = oracle::boundary_grid(ds, mx.dist, g, mode);
        std::vector<std::string> gh{"x", "y", "label"};
        for (const auto& h : prob_headers(k)) gh.push_back(h);
        CsvWriter gcsv(dir / "grid.csv", gh);
        std::vector<int> labels;
        for (const auto& cell : grid.cells) {
            std::vector<std::string> row{fmt(cell.x), fmt(cell.y), std::to_string(cell.label)};
            for (const auto& s : probs_cells(cell.probs, k)) row.push_back(s);
            gcsv.row(row);
            labels.push_back(cell.label);
        }
        write_text(dir / "plot.svg", label_heatmap_svg(ds, g, labels,
                                                      ds.name() + " oracle, " + mx.dist.describe() +
                                                          (c.limit ? ", limit" : ", eps=" + fmt(*c.eps))));
        summary["grid"] = {{"nx", g.nx}, {"ny", g.ny}, {"bounds", {g.x_min, g.x_max, g.y_min, g.y_max}}};
    }
    write_json(dir / "summary.json", summary);
    return exit_ok;
}

// train

struct TrainRun {
    training::Mode mode;
    std::string alpha_label;
    std::optional<MixingDistribution> dist;
    int seed_index;
};

struct TrainOutcome {
    training::History history;
    training::Evaluation eval;
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}
inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline int run_train(const ExperimentConfig& c) {
    const auto ds = make_dataset(c, c.seed);
    const auto dir = output_dir(c);
    write_json(dir / "config.json", to_json(c));
    const int hidden = c.hidden > 0 ? c.hidden : (is_moons(c) ? 500 : 512);
    const int epochs = c.epochs > 0 ? c.epochs : (is_moons(c) ? 1500 : 3000);
    const std::vector<int> sizes{static_cast<int>(ds.dim()), hidden, ds.num_classes()};

    std::vector<TrainRun> runs;
    if (c.mode == "erm" || c.mode == "both")
        for (int s = 0; s < c.seeds; ++s) runs.push_back({training::Mode::erm, "", std::nullopt, s});
    if (c.mode == "mixup" || c.mode == "both")
        for (const auto& mx : make_mixings(c))
            for (int s = 0; s < c.seeds; ++s) runs.push_back({training::Mode::mixup, mx.label, mx.dist, s});

    const auto outcomes = parallel_map<TrainOutcome>(runs.size(), [&](std::size_t r) {
        const auto& run = runs[r];
        const auto s = static_cast<std::uint64_t>(run.seed_index);
        auto model = training::init_mlp(sizes, split_seed(c.seed, 2 * s));
        training::TrainOptions opt{run.mode, run.dist, epochs, static_cast<std::size_t>(c.batch_size),
                                   split_seed(c.seed, 2 * s + 1), {}};
        auto h = training::train(std::move(model), ds, opt);
        auto ev = training::evaluate(h.model, ds);
        return TrainOutcome{std::move(h), std::move(ev)};
    });

    const int k = ds.num_classes();
    {
        CsvWriter hist(dir / "history.csv", {"mode", "alpha", "seed", "epoch", "loss", "train_error"});
        for (std::size_t r = 0; r < runs.size(); ++r)
            for (std::size_t e = 0; e < outcomes[r].history.loss.size(); ++e)
                hist.row({training::to_string(runs[r].mode), runs[r].alpha_label, std::to_string(runs[r].seed_index),
                          std::to_string(e + 1), fmt(outcomes[r].history.loss[e]),
                          fmt(outcomes[r].history.train_error[e])});
    }
    std::vector<std::string> header{"mode", "alpha", "seed", "point", "label", "predicted"};
    for (const auto& h : prob_headers(k)) header.push_back(h);
    CsvWriter csv(dir / "results.csv", header);
    for (std::size_t r = 0; r < runs.size(); ++r)
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& p = outcomes[r].eval.probs[i];
            std::vector<std::string> row{training::to_string(runs[r].mode), runs[r].alpha_label,
                                         std::to_string(runs[r].seed_index), std::to_string(i),
                                         std::to_string(ds.label(i)), std::to_string(p.predicted_class())};
            for (const auto& s : probs_cells(p.probs, k)) row.push_back(s);
            csv.row(row);
        }

    // Group runs by (mode, alpha) for the summary and plots.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const std::string key = training::to_string(runs[r].mode) + (runs[r].alpha_label.empty() ? "" : "_a" + runs[r].alpha_label);
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
        if (it == groups.end()) groups.push_back({key, {r}});
        else it->second.push_back(r);
    }

    json summary{{"dataset", ds.name()}, {"epochs", epochs}, {"layer_sizes", sizes}, {"seeds", c.seeds}};
    json groups_json = json::array();
    for (const auto& [key, idx] : groups) {
        std::vector<double> final_err;
        for (std::size_t r : idx) final_err.push_back(outcomes[r].history.train_error.empty() ? 1.0 - outcomes[r].eval.accuracy : outcomes[r].history.train_error.back());
        json points = json::array();
        for (std::size_t i = 0; i < ds.size(); ++i) {
            std::vector<double> own;
            std::size_t miss = 0;
            for (std::size_t r : idx) {
                own.push_back(outcomes[r].eval.probs[i][static_cast<std::size_t>(ds.label(i) - 1)]);
                miss += outcomes[r].eval.correct[i] ? 0 : 1;
            }
            json pt{{"point", i}, {"label", ds.label(i)}, {"own_class_prob_mean", mean_of(own)},
                    {"own_class_prob_sd", sd_of(own)}, {"misclassified_runs", miss}};
            if (k == 2) {
                std::vector<double> p1;
                for (std::size_t r : idx) p1.push_back(outcomes[r].eval.probs[i][0]);
                pt["class1_prob_mean"] = mean_of(p1);
                pt["class1_prob_sd"] = sd_of(p1);
            }
            points.push_back(pt);
        }
        groups_json.push_back({{"run", key},
                               {"final_train_error_mean", mean_of(final_err)},
                               {"final_train_error_sd", sd_of(final_err)},
                               {"runs_with_nonzero_error",
                                std::count_if(final_err.begin(), final_err.end(), [](double e) { return e > 0.0; })},
                               {"points", points}});
    }
    summary["runs"] = groups_json;

    if (ds.dim() == 2) {
        auto g = default_grid(c, ds);
        if (!c.grid_bounds) g.nx = g.ny = std::min(c.grid_resolution, 121);
        Eigen::MatrixXd cells(2, g.nx * g.ny);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) cells.col(j * g.nx + i) << g.x_at(i), g.y_at(j);
        static const char* overlay_colors[] = {"#000000", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
        SvgCanvas overlay(g.x_min, g.x_max, g.y_min, g.y_max);
        for (std::size_t p = 0; p < ds.size(); ++p)
            overlay.circle(ds.points()(static_cast<Eigen::Index>(p), 0), ds.points()(static_cast<Eigen::Index>(p), 1), 2.5, class_color(ds.label(p)));
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const auto& [key, idx] = groups[gi];
            Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(k, cells.cols());
            for (std::size_t r : idx) avg += training::forward(outcomes[r].history.model, cells);
            avg /= static_cast<double>(idx.size());
            std::vector<int> labels;
            std::vector<double> p1;
            for (Eigen::Index col = 0; col < avg.cols(); ++col) {
                Eigen::Index best;
                avg.col(col).maxCoeff(&best);
                labels.push_back(static_cast<int>(best) + 1);
                p1.push_back(avg(0, col));
            }
            write_text(dir / ("plot_" + key + ".svg"),
                       label_heatmap_svg(ds, g, labels, ds.name() + " " + key + " (mean of " + std::to_string(idx.size()) + " runs)"));
            const char* color = overlay_colors[gi % 5];
            for (const auto& s : contour_segments(g, p1, 0.5))
                overlay.polyline({{s[0], s[1]}, {s[2], s[3]}}, color, 1.5);
            overlay.text(SvgCanvas::margin + 8, SvgCanvas::margin + 16 + 14 * static_cast<double>(gi), key, 11);
            overlay.polyline({{g.x_min + 0.02 * (g.x_max - g.x_min), g.y_max - (0.045 + 0.035 * static_cast<double>(gi)) * (g.y_max - g.y_min)},
                              {g.x_min + 0.015 * (g.x_max - g.x_min), g.y_max - (0.045 + 0.035 * static_cast<double>(gi)) * (g.y_max - g.y_min)}},
                             color, 3.0);
        }
        overlay.frame();
        overlay.text(SvgCanvas::margin, 24, ds.name() + " decision boundaries (p1 = 0.5)", 14);
        write_text(dir / "plot.svg", overlay.str());
    } else {
        // Mean training error per epoch for each run group.
        SvgCanvas svg(0.0, static_cast<double>(std::max(epochs, 1)), 0.0, 1.0, 560, 400);
        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            std::vector<std::pair<double, double>> pts;
            const auto& idx = groups[gi].second;
            const int stride = std::max(1, epochs / 300);
            for (int e = 0; e < epochs; e += stride) {
                double s = 0.0;
                for (std::size_t r : idx) s += outcomes[r].history.train_error[static_cast<std::size_t>(e)];
                pts.emplace_back(e + 1, s / static_cast<double>(idx.size()));
            }
            svg.polyline(pts, colors[gi % 5]);
            svg.text(SvgCanvas::margin + 8, SvgCanvas::margin + 16 + 14 * static_cast<double>(gi), groups[gi].first, 11);
        }
        svg.frame();
        svg.text(SvgCanvas::margin, 24, ds.name() + " training error (mean over seeds)", 14);
        write_text(dir / "plot.svg", svg.str());
    }
    write_json(dir / "summary.json", summary);
    return exit_ok;
}

// recover

inline std::vector<recovery::LabeledMidpoint> read_labeled_midpoints(const std::string& path, std::size_t& m) {
    std::ifstream in(path);
    if (!in) throw ConfigError("midpoints_file", "cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::vector<recovery::LabeledMidpoint> out;
    std::size_t lineno = 1;
    m = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = datasets::detail::split_csv(line);
        if (cells.size() < 3) throw ParseError("expected i,j,coord0,...", lineno);
        recovery::LabeledMidpoint mp;
        const double i = datasets::detail::parse_double(cells[0], lineno), j = datasets::detail::parse_double(cells[1], lineno);
        if (i < 1 || j < 1 || i != std::floor(i) || j != std::floor(j)) throw ParseError("pair indices must be positive integers", lineno);
        mp.i = static_cast<std::size_t>(i) - 1;
        mp.j = static_cast<std::size_t>(j) - 1;
        mp.value.resize(static_cast<Eigen::Index>(cells.size() - 2));
        for (std::size_t c = 2; c < cells.size(); ++c)
            mp.value(static_cast<Eigen::Index>(c - 2)) = datasets::detail::parse_double(cells[c], lineno);
        m = std::max({m, mp.i + 1, mp.j + 1});
        out.push_back(std::move(mp));
    }
    return out;
}

inline std::vector<double> read_unlabeled_midpoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("midpoints_file", "cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = datasets::detail::split_csv(line);
        if (cells.size() != 1) throw ParseError("unlabeled midpoints must be 1-D", lineno);
        out.push_back(datasets::detail::parse_double(cells[0], lineno));
    }
    return out;
}

inline int run_recover(const ExperimentConfig& c) {
    const auto dir = output_dir(c);
    write_json(dir / "config.json", to_json(c));
    json summary{{"m", c.m}, {"dim", c.dim}};

    if (!c.midpoints_file.empty()) {
        CsvWriter csv(dir / "results.csv", {"solution", "point", "coords"});
        if (c.unlabeled) {
            const auto mids = read_unlabeled_midpoints(c.midpoints_file);
            const auto sols = recovery::recover_unlabeled_bruteforce(mids, static_cast<std::size_t>(c.m));
            for (std::size_t s = 0; s < sols.size(); ++s)
                for (std::size_t p = 0; p < sols[s].size(); ++p) csv.row({std::to_string(s), std::to_string(p), fmt(sols[s][p])});
            summary["solutions"] = sols.size();
        } else {
            std::size_t m = 0;
            const auto mids = read_labeled_midpoints(c.midpoints_file, m);
            const auto rec = recovery::recover_labeled(mids, m);
            for (Eigen::Index p = 0; p < rec.points.rows(); ++p) {
                std::string coords;
                for (Eigen::Index d = 0; d < rec.points.cols(); ++d) coords += (d ? ";" : "") + fmt(rec.points(p, d));
                csv.row({"0", std::to_string(p), coords});
            }
            summary["residual"] = rec.residual;
        }
        write_json(dir / "summary.json", summary);
        return exit_ok;
    }

    const auto m = static_cast<std::size_t>(c.m);
    if (c.unlabeled && c.dim != 1) throw ConfigError("dim", "unlabeled recovery is 1-D only");
    CsvWriter csv(dir / "results.csv", {"trial", "residual", "max_error", "solutions", "unique_match"});
    double worst_residual = 0.0, worst_error = 0.0;
    std::size_t unique_matches = 0;
    for (int t = 0; t < c.trials; ++t) {
        Rng rng(split_seed(c.seed, static_cast<std::uint64_t>(t)));
        std::normal_distribution<double> normal;
        PointMatrix pts(static_cast<Eigen::Index>(m), c.dim);
        for (Eigen::Index i = 0; i < pts.rows(); ++i)
            for (Eigen::Index d = 0; d < pts.cols(); ++d) pts(i, d) = normal(rng);
        const auto rec = recovery::recover_labeled(recovery::form_midpoints(pts), m);
        const double err = (rec.points - pts).cwiseAbs().maxCoeff();
        worst_residual = std::max(worst_residual, rec.residual);
        worst_error = std::max(worst_error, err);
        std::string nsol, match;
        if (c.unlabeled) {
            std::vector<double> orig(pts.data(), pts.data() + m);
            std::sort(orig.begin(), orig.end());
            const auto sols = recovery::recover_unlabeled_bruteforce(recovery::midpoint_multiset(orig), m);
            bool ok = sols.size() == 1;
            for (std::size_t i = 0; ok && i < m; ++i) ok = std::abs(sols[0][i] - orig[i]) <= 1e-8;
            unique_matches += ok ? 1 : 0;
            nsol = std::to_string(sols.size());
            match = ok ? "1" : "0";
        }
        csv.row({std::to_string(t), fmt(rec.residual), fmt(err), nsol, match});
    }
    summary["trials"] = c.trials;
    summary["max_residual"] = worst_residual;
    summary["max_error"] = worst_error;
    if (c.unlabeled) summary["unique_matches"] = unique_matches;
    if (c.rank_trials > 0) {
        const auto rep = recovery::permutation_rank_trial(m, static_cast<std::size_t>(c.rank_trials), c.seed);
        summary["rank_trials"] = {{"trials", rep.trials},
                                  {"column_perm_count", rep.column_perm_count},
                                  {"min_rank_non_column", rep.min_rank_non_column ? json(*rep.min_rank_non_column) : json(nullptr)},
                                  {"max_rank_column", rep.max_rank_column ? json(*rep.max_rank_column) : json(nullptr)}};
    }
    write_json(dir / "summary.json", summary);
    return exit_ok;
}

// assumptions

inline LabeledDataset make_reference(const ExperimentConfig& c, const LabeledDataset& train) {
    if (c.reference == "train") return train;
    if (c.dataset == "mnist") {
        const fs::path dir(c.mnist_dir);
        return datasets::load_idx((dir / "t10k-images-idx3-ubyte").string(), (dir / "t10k-labels-idx1-ubyte").string(),
                                  c.fraction, split_seed(c.seed, 1));
    }
    if (c.dataset == "moons" || c.dataset == "gaussian") return make_dataset(c, split_seed(c.seed, 1));
    throw ConfigError("reference", "no held-out split for dataset '" + c.dataset + "'");
}

inline int run_assumptions(const ExperimentConfig& c) {
    const auto ds = make_dataset(c, c.seed);
    const auto ref = make_reference(c, ds);
    const auto mixings = make_mixings(c);
    const auto dir = output_dir(c);
    write_json(dir / "config.json", to_json(c));
    const std::size_t n_samples = c.n_samples > 0 ? static_cast<std::size_t>(c.n_samples) : ds.size();

    json summary{{"dataset", ds.name()}, {"points", ds.size()}, {"reference", c.reference}, {"samples", n_samples}};
    CsvWriter csv(dir / "results.csv", {"alpha", "reference", "min_distance", "samples", "eligible_samples"});
    json est = json::array();
    for (const auto& mx : mixings) {
        const auto e = assumptions::estimate_epsilon(ds, mx.dist, n_samples, ref, c.seed);
        csv.row({mx.label, c.reference, fmt(e.min_distance), std::to_string(e.samples), std::to_string(e.eligible_samples)});
        json row{{"alpha", mx.label}, {"min_distance", std::isfinite(e.min_distance) ? json(e.min_distance) : json("inf")}};
        if (!e.warning.empty()) row["warning"] = e.warning;
        est.push_back(row);
    }
    summary["estimates"] = est;

    const double tol = c.tol_line ? *c.tol_line : oracle::default_tol_line(ds);
    if (ds.size() <= 2000) {
        const auto v = assumptions::check_assumption1(ds, tol);
        CsvWriter vcsv(dir / "violations.csv", {"x_idx", "u_idx", "v_idx", "lambda", "residual"});
        for (const auto& x : v)
            vcsv.row({std::to_string(x.x_index), std::to_string(x.u_index), std::to_string(x.v_index), fmt(x.lambda), fmt(x.residual)});
        summary["assumption1"] = {{"holds", v.empty()}, {"violations", v.size()}, {"tol", tol}};
    }
    if (ds.num_classes() >= 2) {
        json radii = json::array();
        for (int i = 1; i <= ds.num_classes(); ++i) radii.push_back(assumptions::margin_radius(ds, i));
        summary["margin_radius"] = radii;
    }
    if (!c.probes.empty()) {
        if (!c.eps) throw ConfigError("eps", "assumption 2 checks need eps");
        json a2 = json::array();
        for (const auto& p : c.probes) {
            if (p.size() != ds.dim()) throw ConfigError("probes", "dimension mismatch");
            const Vector x = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
            json per_class = json::array();
            for (int i = 1; i <= ds.num_classes(); ++i) {
                const auto r = assumptions::check_assumption2(ds, mixings.front().dist, x, i, *c.eps, c.delta, tol);
                per_class.push_back({{"class", i}, {"holds", r.holds}, {"in_xmix", r.in_xmix}, {"violations", r.violations.size()}});
            }
            a2.push_back({{"probe", p}, {"classes", per_class}});
        }
        summary["assumption2"] = a2;
    }
    write_json(dir / "summary.json", summary);
    return exit_ok;
}

// linear

struct LinearTrialRow {
    std::uint64_t seed;
    bool is_max_margin;
    std::vector<double> cosine, k_mixup, grad_norm, residual;
    std::vector<int> iters;
};

inline int run_linear(const ExperimentConfig& c) {
    const auto mixings = make_mixings(c);
    for (const auto& mx : mixings)
        if (!mx.dist.is_symmetric()) throw ConfigError("mixing", "linear experiments need a symmetric mixing distribution");
    const auto dir = output_dir(c);
    write_json(dir / "config.json", to_json(c));
    linear::MinimizeOptions mo;
    mo.max_iters = c.max_iters;
    mo.grad_tol = c.grad_tol;
    mo.loss.quadrature_nodes = c.quadrature_nodes;
    mo.loss.terms = c.terms == "cross" ? linear::PairTerms::cross_only : linear::PairTerms::all;

    const auto rows = parallel_map<LinearTrialRow>(static_cast<std::size_t>(c.trials), [&](std::size_t t) {
        const auto seed = split_seed(c.seed, t);
        const auto ds = datasets::gaussian_binary(c.n, c.d, seed);
        const auto [interp, cert] = linear::min_norm_interpolator(ds);
        LinearTrialRow row{seed, cert.is_max_margin, {}, {}, {}, {}, {}};
        for (const auto& mx : mixings) {
            const auto res = linear::minimize_mixup_linear(ds, mx.dist, mo);
            const auto [k, resid] = linear::margin_equality(ds, res.classifier.theta);
            row.cosine.push_back(linear::cosine(res.classifier.theta, interp.theta));
            row.k_mixup.push_back(k);
            row.grad_norm.push_back(res.grad_norm);
            row.residual.push_back(resid);
            row.iters.push_back(res.iterations);
        }
        return row;
    });

    CsvWriter csv(dir / "results.csv", {"seed", "alpha", "is_max_margin", "cosine", "k_mixup", "grad_norm", "iters", "margin_residual"});
    std::size_t mm = 0;
    for (const auto& r : rows) {
        mm += r.is_max_margin ? 1 : 0;
        for (std::size_t a = 0; a < mixings.size(); ++a)
            csv.row({std::to_string(r.seed), mixings[a].label, r.is_max_margin ? "1" : "0", fmt(r.cosine[a]),
                     fmt(r.k_mixup[a]), fmt(r.grad_norm[a]), std::to_string(r.iters[a]), fmt(r.residual[a])});
    }
    json summary{{"n", c.n}, {"d", c.d}, {"trials", c.trials},
                 {"max_margin_fraction", static_cast<double>(mm) / static_cast<double>(rows.size())}};
    json per_alpha = json::array();
    for (std::size_t a = 0; a < mixings.size(); ++a) {
        std::vector<double> cos, rel;
        for (const auto& r : rows)
            if (r.is_max_margin) {
                cos.push_back(r.cosine[a]);
                rel.push_back(r.residual[a] / r.k_mixup[a]);
            }
        json entry{{"alpha", mixings[a].label},
                   {"mean_cosine_given_max_margin", cos.empty() ? json(nullptr) : json(mean_of(cos))},
                   {"min_cosine_given_max_margin", cos.empty() ? json(nullptr) : json(*std::min_element(cos.begin(), cos.end()))},
                   {"max_relative_margin_residual", rel.empty() ? json(nullptr) : json(*std::max_element(rel.begin(), rel.end()))}};
        try {
            entry["k_estimate"] = linear::estimate_k(mixings[a].dist);
        } catch (const NumericError& e) {
            entry["k_estimate"] = nullptr;
            entry["k_error"] = e.what();
        }
        per_alpha.push_back(entry);
    }
    summary["alphas"] = per_alpha;
    write_json(dir / "summary.json", summary);
    return exit_ok;
}

inline int dispatch(const ExperimentConfig& c) {
    validate(c);
    if (c.subcommand == "oracle") return run_oracle(c);
    if (c.subcommand == "train") return run_train(c);
    if (c.subcommand == "recover") return run_recover(c);
    if (c.subcommand == "assumptions") return run_assumptions(c);
    return run_linear(c);
}

} // namespace mixup::app

#endif // MIXUP_APP_COMMANDS_HPP
