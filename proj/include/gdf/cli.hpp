#pragma once

// Command-line front end: generate, train, evaluate, sweep.
// Exit codes: 0 success, 1 other failure, 2 config error, 3 data error, 4 numeric error.

#include "gdf/config.hpp"
#include "gdf/errors.hpp"
#include "gdf/experiment.hpp"
#include "gdf/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace gdf::cli {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string data;
    std::string out;
    std::string model;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda;
    std::optional<std::string> problem;
};

inline config::ExperimentConfig load_config(const Options& o) {
    config::ExperimentConfig c = o.config.empty() ? config::ExperimentConfig{} : config::load(o.config);
    if (o.seed) c = config::with_seed(c, *o.seed);
    if (o.lambda) c.training.lambda = *o.lambda;
    if (o.problem) {
        if (*o.problem == "deployment") c.problem.kind = problems::ProblemKind::Deployment;
        else if (*o.problem == "undergrounding") c.problem.kind = problems::ProblemKind::Undergrounding;
        else throw ConfigError("--problem must be deployment or undergrounding");
    }
    c.validate();
    return c;
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

inline void cmd_generate(const Options& o) {
    const auto c = load_config(o);
    io::write_dataset(o.out, experiment::synthetic_dataset(c));
}

inline void cmd_train(const Options& o) {
    const auto c = load_config(o);
    const io::Dataset data = io::read_dataset(o.data);
    if (data.features.size() != c.data.features) {
        throw DataError(o.data + ": " + std::to_string(data.features.size()) + " feature columns, config expects " +
                        std::to_string(c.data.features));
    }
    const experiment::Prepared p = experiment::prepare(c, data.events);
    const experiment::Trained t = experiment::train(p, c);
    ensure_dir(o.out);
    io::save_checkpoint(fs::path(o.out) / "two_stage.ckpt", t.two_stage);
    io::save_checkpoint(fs::path(o.out) / "gdf.ckpt", t.gdf);
    io::write_text(fs::path(o.out) / "curves.csv", io::curve_csv(t.curve));
}

inline std::optional<io::Checkpoint> maybe_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) {
        std::cerr << "warning: " << path.string() << " not found; its rows are reported as NA\n";
        return std::nullopt;
    }
    return io::load_checkpoint(path);
}

inline void cmd_evaluate(const Options& o) {
    const auto c = load_config(o);
    const io::Dataset data = io::read_dataset(o.data);
    const experiment::Prepared p = experiment::prepare(c, data.events);
    const fs::path model = o.model.empty() ? fs::path(o.out) : fs::path(o.model);
    const auto rows = experiment::evaluate(p, maybe_checkpoint(model / "two_stage.ckpt"),
                                           maybe_checkpoint(model / "gdf.ckpt"), c.online_lags);
    ensure_dir(o.out);
    io::write_text(fs::path(o.out) / "metrics.csv", experiment::metrics_csv(rows));
    io::write_text(fs::path(o.out) / "summary.csv", experiment::summary_csv(rows));
    io::write_text(fs::path(o.out) / "metrics.json",
                   experiment::metrics_json(rows, problems::to_string(c.problem.kind)).dump(2) + "\n");
    std::cout << experiment::summary_csv(rows);
}

inline void cmd_sweep(const Options& o) {
    const auto c = load_config(o);
    const auto points = experiment::run_sweep(c);
    ensure_dir(o.out);
    const std::string csv = experiment::sweep_csv(points, c.sweep);
    io::write_text(fs::path(o.out) / "sweep.csv", csv);
    std::cout << csv;
}

/// Maps library errors to exit codes after printing the message.
template <class F>
int guarded(F&& f) {
    try {
        f();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int run(int argc, char** argv) {
    CLI::App app{"Decision-focused outage forecasting experiments"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;
    double lambda = 0.0;
    std::string problem;

    auto common = [&](CLI::App* sub, bool needs_data) {
        sub->add_option("--config", o.config, "experiment config file");
        sub->add_option("--out", o.out, "output directory")->required();
        sub->add_option("--seed", seed, "override experiment.seed");
        sub->add_option("--lambda", lambda, "override training.lambda");
        sub->add_option("--problem", problem, "deployment or undergrounding");
        if (needs_data) sub->add_option("--data", o.data, "data directory")->required();
    };
    CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
    common(gen, false);
    CLI::App* train = app.add_subcommand("train", "pretrain and finetune; write checkpoints and curves");
    common(train, true);
    CLI::App* eval = app.add_subcommand("evaluate", "score all policies on the test events");
    common(eval, true);
    eval->add_option("--model", o.model, "directory holding two_stage.ckpt and gdf.ckpt (default: --out)");
    CLI::App* sweep = app.add_subcommand("sweep", "seeds x sweep values on synthetic data");
    common(sweep, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed")) o.seed = seed;
    if (chosen->count("--lambda")) o.lambda = lambda;
    if (chosen->count("--problem")) o.problem = problem;

    return guarded([&] {
        if (chosen == gen) cmd_generate(o);
        else if (chosen == train) cmd_train(o);
        else if (chosen == eval) cmd_evaluate(o);
        else cmd_sweep(o);
    });
}

} // namespace gdf::cli
