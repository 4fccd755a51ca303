#pragma once

// Experiment configuration: a flat INI-style file with [data], [model], [problem],
// [training] and [experiment] sections. Unknown sections and keys are errors.

#include "gdf/errors.hpp"
#include "gdf/problems.hpp"
#include "gdf/synthdata.hpp"
#include "gdf/training.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gdf::config {

struct ExperimentConfig {
    synth::SyntheticConfig data;
    training::TrainConfig training;
    problems::Problem problem;

    // network shape; the network itself is rebuilt by deployment_network()
    std::size_t warehouses = 1;
    double edge_cost = 100.0;
    std::size_t travel = 1;
    double stock = 5.0;

    double start_fraction = 0.01; // event-start trigger on ingested data
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<std::size_t> online_lags{1, 3, 5};
    std::string sweep = "travel"; // travel | lambda | edge_cost
    std::vector<double> sweep_values{1, 5, 10};

    problems::DeploymentNetwork deployment_network(std::size_t horizon) const {
        problems::DeploymentNetwork net = problems::DeploymentNetwork::star(data.units, warehouses, horizon,
                                                                            edge_cost, travel, stock);
        net.capacity = problem.network.capacity;
        net.generator_capacity = problem.network.generator_capacity;
        net.interruption_cost = problem.network.interruption_cost;
        net.operation_cost = problem.network.operation_cost;
        return net;
    }

    /// Problem instance for events with `horizon` steps.
    problems::Problem problem_for(std::size_t horizon) const {
        problems::Problem p = problem;
        p.network = deployment_network(horizon);
        return p;
    }

    void validate() const {
        data.validate();
        training.validate();
        auto fail = [](const std::string& what) { throw ConfigError(what); };
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("experiment.train_fraction must lie in (0, 1)");
        if (!(start_fraction > 0.0 && start_fraction < 1.0)) fail("data.start_fraction must lie in (0, 1)");
        if (seeds.empty()) fail("experiment.seeds must not be empty");
        for (std::size_t lag : online_lags) {
            if (lag < 1) fail("experiment.online_lags entries must be at least 1");
        }
        if (sweep != "travel" && sweep != "lambda" && sweep != "edge_cost") {
            fail("experiment.sweep must be travel, lambda or edge_cost");
        }
        if (warehouses < 1) fail("problem.warehouses must be at least 1");
        if (problem.kind == problems::ProblemKind::Undergrounding && problem.budget > data.units) {
            fail("problem.budget exceeds the number of units");
        }
        problem_for(data.horizon).network.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double parse_double(const std::string& v, const std::string& where) {
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) throw ConfigError(where + ": expected a number, got '" + v + "'");
    return x;
}

inline std::uint64_t parse_uint(const std::string& v, const std::string& where) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(where + ": expected a nonnegative integer, got '" + v + "'");
    }
    errno = 0;
    const unsigned long long x = std::strtoull(v.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigError(where + ": integer out of range");
    return x;
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

} // namespace detail

/// Parses configuration text. `origin` prefixes diagnostics, e.g. the file name.
inline ExperimentConfig parse(const std::string& text, const std::string& origin = "config") {
    ExperimentConfig c;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto real = [](double& dst) -> Setter { return [&dst](const std::string& v, const std::string& w) { dst = detail::parse_double(v, w); }; };
    auto count = [](std::size_t& dst) -> Setter {
        return [&dst](const std::string& v, const std::string& w) { dst = static_cast<std::size_t>(detail::parse_uint(v, w)); };
    };
    auto reals = [](std::vector<double>& dst) -> Setter {
        return [&dst](const std::string& v, const std::string& w) {
            dst.clear();
            for (const auto& s : detail::split_list(v)) dst.push_back(detail::parse_double(s, w));
        };
    };

    std::map<std::string, std::map<std::string, Setter>> keys;
    auto& d = keys["data"];
    d["units"] = count(c.data.units);
    d["features"] = count(c.data.features);
    d["horizon"] = count(c.data.horizon);
    d["dt"] = real(c.data.dt);
    d["events"] = count(c.data.events);
    d["customers_min"] = real(c.data.customers_min);
    d["customers_max"] = real(c.data.customers_max);
    d["initial_fraction"] = real(c.data.initial_fraction);
    d["noise"] = real(c.data.noise);
    d["substeps"] = count(c.data.substeps);
    d["failure_cap"] = real(c.data.failure_cap);
    d["restoration_cap"] = real(c.data.restoration_cap);
    d["failure_weights"] = reals(c.data.failure_weights);
    d["failure_bias"] = real(c.data.failure_bias);
    d["restoration_weights"] = reals(c.data.restoration_weights);
    d["restoration_bias"] = real(c.data.restoration_bias);
    d["start_fraction"] = real(c.start_fraction);

    auto& m = keys["model"];
    m["hidden"] = count(c.training.hidden);
    m["failure_cap"] = real(c.training.caps.failure);
    m["restoration_cap"] = real(c.training.caps.restoration);

    auto& p = keys["problem"];
    p["kind"] = [&c](const std::string& v, const std::string& w) {
        if (v == "deployment") c.problem.kind = problems::ProblemKind::Deployment;
        else if (v == "undergrounding") c.problem.kind = problems::ProblemKind::Undergrounding;
        else throw ConfigError(w + ": expected deployment or undergrounding, got '" + v + "'");
    };
    p["warehouses"] = count(c.warehouses);
    p["edge_cost"] = real(c.edge_cost);
    p["travel"] = count(c.travel);
    p["stock"] = real(c.stock);
    p["edge_capacity"] = real(c.problem.network.capacity);
    p["generator_capacity"] = real(c.problem.network.generator_capacity);
    p["interruption_cost"] = real(c.problem.network.interruption_cost);
    p["operation_cost"] = real(c.problem.network.operation_cost);
    p["budget"] = count(c.problem.budget);

    auto& t = keys["training"];
    t["pretrain_lr"] = real(c.training.pretrain_lr);
    t["finetune_lr"] = real(c.training.finetune_lr);
    t["lambda"] = real(c.training.lambda);
    t["rho"] = real(c.training.rho);
    t["clip_norm"] = real(c.training.clip_norm);
    t["pretrain_epochs"] = count(c.training.pretrain_epochs);
    t["finetune_epochs"] = count(c.training.finetune_epochs);
    t["batch_size"] = count(c.training.batch_size);
    t["loss_unit"] = real(c.training.loss_unit);

    auto& e = keys["experiment"];
    e["seed"] = [&c](const std::string& v, const std::string& w) { c.seed = detail::parse_uint(v, w); };
    e["seeds"] = [&c](const std::string& v, const std::string& w) {
        c.seeds.clear();
        for (const auto& s : detail::split_list(v)) c.seeds.push_back(detail::parse_uint(s, w));
    };
    e["train_fraction"] = real(c.train_fraction);
    e["online_lags"] = [&c](const std::string& v, const std::string& w) {
        c.online_lags.clear();
        for (const auto& s : detail::split_list(v)) c.online_lags.push_back(static_cast<std::size_t>(detail::parse_uint(s, w)));
    };
    e["sweep"] = [&c](const std::string& v, const std::string&) { c.sweep = v; };
    e["sweep_values"] = reals(c.sweep_values);

    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!keys.contains(section)) throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        if (section.empty()) throw ConfigError(where + ": key outside any section");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = keys[section].find(key);
        if (it == keys[section].end()) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
        it->second(value, where + " (" + section + "." + key + ")");
    }
    c.data.seed = c.seed;
    c.training.seed = c.seed;
    c.validate();
    return c;
}

inline ExperimentConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
}

/// Applies an experiment seed to every seeded component.
inline ExperimentConfig with_seed(ExperimentConfig c, std::uint64_t seed) {
    c.seed = seed;
    c.data.seed = seed;
    c.training.seed = seed;
    return c;
}

} // namespace gdf::config
