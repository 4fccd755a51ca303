#pragma once

// End-to-end experiment pipeline: data preparation, two-stage and GDF training,
// evaluation of every policy, and parameter sweeps across seeds.

#include "gdf/baselines.hpp"
#include "gdf/config.hpp"
#include "gdf/io.hpp"
#include "gdf/synthdata.hpp"
#include "gdf/training.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace gdf::experiment {

using config::ExperimentConfig;

/// Worker count from GDF_THREADS (default 1).
inline std::size_t thread_count() {
    const char* v = std::getenv("GDF_THREADS");
    if (!v || !*v) return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw ConfigError("GDF_THREADS must be a positive integer");
    return static_cast<std::size_t>(n);
}

/// Runs f(0..n-1) on up to `threads` workers; results keep index order and the
/// lowest-index exception is rethrown.
template <class F>
auto parallel_map(std::size_t n, F f, std::size_t threads) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next == n) return;
                i = next++;
            }
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

inline io::Dataset synthetic_dataset(const ExperimentConfig& c) {
    io::Dataset d;
    for (std::size_t k = 0; k < c.data.units; ++k) d.unit_ids.push_back("u" + std::to_string(k + 1));
    for (std::size_t i = 0; i < c.data.features; ++i) d.features.push_back("z" + std::to_string(i + 1));
    for (auto& ev : synth::generate(c.data)) d.events.push_back(std::move(ev.observed));
    return d;
}

struct Prepared {
    problems::Problem problem;
    ode::CovariateScaler scaler;
    std::vector<training::Example> train;
    std::vector<training::Example> test;

    std::vector<ode::HazardEvent> train_events() const {
        std::vector<ode::HazardEvent> out;
        for (const auto& ex : train) out.push_back(ex.event);
        return out;
    }
};

/// Trigger, split by index, fit the scaler on the training part, cache true optima.
/// Decisions are scored against the observed series.
inline Prepared prepare(const ExperimentConfig& c, const std::vector<ode::HazardEvent>& events) {
    std::vector<ode::HazardEvent> aligned;
    for (const auto& e : events) aligned.push_back(io::apply_start_trigger(e, c.start_fraction, c.data.horizon));
    auto [train, test] = synth::split(aligned, c.train_fraction);
    Prepared p;
    p.problem = c.problem_for(c.data.horizon);
    p.scaler = ode::CovariateScaler::fit(train);
    auto examples = [&](const std::vector<ode::HazardEvent>& part) {
        return parallel_map(
            part.size(),
            [&](std::size_t i) {
                ode::HazardEvent e = p.scaler.apply(part[i]);
                problems::Series truth = e.outages;
                return training::make_example(p.problem, std::move(e), std::move(truth));
            },
            thread_count());
    };
    p.train = examples(train);
    p.test = examples(test);
    return p;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct Trained {
    io::Checkpoint two_stage;
    io::Checkpoint gdf;
    training::Curve curve;
};

inline io::Checkpoint pretrain_model(const Prepared& p, const ExperimentConfig& c, training::Curve* curve) {
    const auto events = p.train_events();
    const ode::OutageModel init =
        ode::OutageModel::initialized(events.front().features(), c.training.hidden, c.seed, c.training.caps);
    return {training::pretrain(init, events, c.training, curve), p.scaler};
}

inline io::Checkpoint finetune_model(const io::Checkpoint& mse, const Prepared& p, const ExperimentConfig& c,
                                     training::Curve* curve) {
    return {training::finetune_gdf(mse.model, p.train, p.problem, c.training, curve), mse.scaler};
}

inline Trained train(const Prepared& p, const ExperimentConfig& c) {
    Trained t;
    t.two_stage = pretrain_model(p, c, &t.curve);
    t.gdf = finetune_model(t.two_stage, p, c, &t.curve);
    return t;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EventRow {
    std::string event_id;
    std::optional<double> mse;
    std::optional<double> cost;
    std::optional<double> regret;
};

struct MethodRows {
    std::string method;
    std::vector<EventRow> events;
};

struct Summary {
    std::optional<double> mean;
    std::optional<double> std;
};

inline Summary summarize(const std::vector<EventRow>& rows, std::optional<double> EventRow::* field) {
    std::vector<double> v;
    for (const auto& r : rows) {
        if (!(r.*field)) return {};
        v.push_back(*(r.*field));
    }
    if (v.empty()) return {};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return {mean, sd};
}

inline MethodRows model_rows(const std::string& name, const std::optional<io::Checkpoint>& ckpt, const Prepared& p) {
    MethodRows m{name, {}};
    for (const auto& ex : p.test) {
        if (!ckpt) {
            m.events.push_back({ex.event.id, std::nullopt, std::nullopt, std::nullopt});
            continue;
        }
        if (ckpt->scaler.mean != p.scaler.mean || ckpt->scaler.scale != p.scaler.scale) {
            throw DataError(name + " checkpoint was trained with different covariate statistics");
        }
        const training::EventMetrics r =
            training::score_forecast(training::forecast_series(ckpt->model, ex.event), ex, p.problem);
        m.events.push_back({r.event_id, r.mse, r.cost, r.regret});
    }
    return m;
}

/// Rows: true_optimal, two_stage, gdf, then online_lag_<L> for deployment problems.
/// A missing checkpoint yields NA entries for that method.
inline std::vector<MethodRows> evaluate(const Prepared& p, const std::optional<io::Checkpoint>& two_stage,
                                        const std::optional<io::Checkpoint>& gdf, const std::vector<std::size_t>& lags) {
    std::vector<MethodRows> out;
    MethodRows opt{"true_optimal", {}};
    for (const auto& ex : p.test) opt.events.push_back({ex.event.id, std::nullopt, ex.optimal_cost, 0.0});
    out.push_back(std::move(opt));
    out.push_back(model_rows("two_stage", two_stage, p));
    out.push_back(model_rows("gdf", gdf, p));
    if (p.problem.kind == problems::ProblemKind::Deployment) {
        for (std::size_t lag : lags) {
            MethodRows m{"online_lag_" + std::to_string(lag), {}};
            for (const auto& ex : p.test) {
                const auto plan = baselines::online_policy(p.problem.network, ex.event.outages, lag);
                const double cost = problems::deployment_cost(p.problem.network, plan, ex.truth);
                m.events.push_back({ex.event.id, std::nullopt, cost, cost - ex.optimal_cost});
            }
            out.push_back(std::move(m));
        }
    }
    return out;
}

inline std::string na_or(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

inline std::string metrics_csv(const std::vector<MethodRows>& rows) {
    std::string out = "method,event_id,mse,cost,regret\n";
    for (const auto& m : rows) {
        for (const auto& e : m.events) {
            out += m.method + "," + e.event_id + "," + na_or(e.mse) + "," + na_or(e.cost) + "," + na_or(e.regret) + "\n";
        }
    }
    return out;
}

inline std::string summary_csv(const std::vector<MethodRows>& rows) {
    std::string out = "method,mse_mean,mse_std,cost_mean,cost_std,regret_mean,regret_std\n";
    for (const auto& m : rows) {
        const Summary a = summarize(m.events, &EventRow::mse), b = summarize(m.events, &EventRow::cost),
                      c = summarize(m.events, &EventRow::regret);
        out += m.method + "," + na_or(a.mean) + "," + na_or(a.std) + "," + na_or(b.mean) + "," + na_or(b.std) + "," +
               na_or(c.mean) + "," + na_or(c.std) + "\n";
    }
    return out;
}

inline nlohmann::json metrics_json(const std::vector<MethodRows>& rows, const std::string& problem) {
    auto value = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["problem"] = problem;
    j["methods"] = nlohmann::json::array();
    for (const auto& m : rows) {
        nlohmann::json jm;
        jm["method"] = m.method;
        for (auto [name, field] : {std::pair{"mse", &EventRow::mse}, std::pair{"cost", &EventRow::cost},
                                   std::pair{"regret", &EventRow::regret}}) {
            const Summary s = summarize(m.events, field);
            jm[name] = {{"mean", value(s.mean)}, {"std", value(s.std)}};
        }
        jm["events"] = nlohmann::json::array();
        for (const auto& e : m.events) {
            jm["events"].push_back({{"event_id", e.event_id}, {"mse", value(e.mse)}, {"cost", value(e.cost)},
                                    {"regret", value(e.regret)}});
        }
        j["methods"].push_back(std::move(jm));
    }
    return j;
}

inline std::optional<double> mean_regret(const std::vector<MethodRows>& rows, const std::string& method) {
    for (const auto& m : rows) {
        if (m.method == method) return summarize(m.events, &EventRow::regret).mean;
    }
    return std::nullopt;
}

inline std::optional<double> mean_cost(const std::vector<MethodRows>& rows, const std::string& method) {
    for (const auto& m : rows) {
        if (m.method == method) return summarize(m.events, &EventRow::cost).mean;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

inline ExperimentConfig with_sweep_value(ExperimentConfig c, const std::string& sweep, double v) {
    if (sweep == "travel") {
        if (v < 0.0 || v != std::floor(v)) throw ConfigError("travel sweep values must be nonnegative integers");
        c.travel = static_cast<std::size_t>(v);
    } else if (sweep == "lambda") {
        c.training.lambda = v;
    } else if (sweep == "edge_cost") {
        c.edge_cost = v;
    } else {
        throw ConfigError("unknown sweep '" + sweep + "'");
    }
    c.validate();
    return c;
}

struct SweepPoint {
    std::uint64_t seed = 0;
    double value = 0.0;
    std::vector<MethodRows> rows;
};

/// For each seed: generate data, pretrain once, then finetune and evaluate at every sweep value.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& base) {
    const auto per_seed = parallel_map(
        base.seeds.size(),
        [&](std::size_t s) {
            const ExperimentConfig c = config::with_seed(base, base.seeds[s]);
            const io::Dataset data = synthetic_dataset(c);
            const io::Checkpoint mse = pretrain_model(prepare(c, data.events), c, nullptr);
            std::vector<SweepPoint> points;
            for (double v : base.sweep_values) {
                const ExperimentConfig cv = with_sweep_value(c, base.sweep, v);
                const Prepared p = prepare(cv, data.events);
                const io::Checkpoint gdf = finetune_model(mse, p, cv, nullptr);
                points.push_back({c.seed, v, evaluate(p, mse, gdf, cv.online_lags)});
            }
            return points;
        },
        thread_count());
    std::vector<SweepPoint> out;
    for (const auto& ps : per_seed) out.insert(out.end(), ps.begin(), ps.end());
    return out;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points, const std::string& sweep) {
    std::string out = "seed," + sweep + ",method,cost_mean,regret_mean,mse_mean\n";
    for (const auto& pt : points) {
        for (const auto& m : pt.rows) {
            out += std::to_string(pt.seed) + "," + io::format_double(pt.value) + "," + m.method + "," +
                   na_or(summarize(m.events, &EventRow::cost).mean) + "," +
                   na_or(summarize(m.events, &EventRow::regret).mean) + "," +
                   na_or(summarize(m.events, &EventRow::mse).mean) + "\n";
        }
    }
    return out;
}

} // namespace gdf::experiment
