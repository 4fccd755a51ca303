#pragma once

// MSE pretraining and decision-focused finetuning of the outage model.
//
// One finetune epoch runs a gradient step on the regret of every training event in
// order, followed by lambda-weighted MSE steps over shuffled mini-batches. The regret
// gradient reaches the forecast through the relaxed QP (implicit KKT differentiation)
// and the model parameters through the unrolled Euler integration.

#include "gdf/autodiff.hpp"
#include "gdf/errors.hpp"
#include "gdf/ode.hpp"
#include "gdf/problems.hpp"
#include "gdf/solvers/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gdf::training {

using problems::Series;

struct TrainConfig {
    double pretrain_lr = 1e-2;
    double finetune_lr = 1e-3;
    double lambda = 1.0;
    double rho = 0.1;
    double clip_norm = 10.0; // finetune steps only
    std::size_t pretrain_epochs = 2000;
    std::size_t finetune_epochs = 30;
    std::size_t batch_size = 2;
    std::size_t hidden = 32;
    double loss_unit = 3.0; // training MSE is taken on loss_unit * y / N_k
    std::uint64_t seed = 0;
    ode::RateCaps caps;

    void validate() const {
        auto fail = [](const std::string& what) { throw ConfigError("training config: " + what); };
        if (!(pretrain_lr > 0.0) || !(finetune_lr > 0.0)) fail("learning rates must be positive");
        if (!(lambda >= 0.0)) fail("lambda must be nonnegative");
        if (!(rho > 0.0)) fail("rho must be positive");
        if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
        if (batch_size < 1) fail("batch_size must be at least 1");
        if (!(loss_unit > 0.0)) fail("loss_unit must be positive");
        if (!(caps.failure > 0.0) || !(caps.restoration > 0.0)) fail("rate caps must be positive");
    }
};

/// A training or evaluation event with its cached true-optimal reference.
struct Example {
    ode::HazardEvent event;   // covariates already scaled
    Series truth;             // S: the outage series decisions are scored against
    problems::Decision optimal;
    double optimal_cost = 0.0;
};

inline Example make_example(const problems::Problem& p, ode::HazardEvent event, Series truth) {
    problems::Decision best = problems::decide(p, truth, event);
    const double cost = problems::decision_cost(p, best, truth, event);
    return Example{std::move(event), std::move(truth), std::move(best), cost};
}

inline Series forecast_series(const ode::OutageModel& m, const ode::HazardEvent& e) {
    return ode::outaged_series(ode::predict_event(m, e));
}

/// Mean over (event, unit, j = 1..T) of (y - Y_hat)^2, in customers squared.
inline double mse_loss(const ode::OutageModel& m, std::span<const ode::HazardEvent> events) {
    if (events.empty()) throw ContractError("mse_loss: no events");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& e : events) {
        const Series f = forecast_series(m, e);
        for (std::size_t k = 0; k < e.units(); ++k) {
            for (std::size_t j = 1; j < e.timestamps.size(); ++j) {
                const double d = e.outages[k][j] - f[k][j];
                total += d * d;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Mean scaled squared error over a batch and its parameter gradient.
inline LossAndGradient mse_gradient(const ode::OutageModel& m, std::span<const ode::HazardEvent* const> batch,
                                    double loss_unit) {
    LossAndGradient out;
    out.gradient.assign(m.parameter_count(), 0.0);
    std::size_t count = 0;
    for (const auto* e : batch) count += e->units() * e->steps();
    const double norm = 1.0 / static_cast<double>(count);
    for (const auto* e : batch) {
        ad::Tape tape;
        const ode::ModelNodes nodes = ode::add_model(tape, m);
        const ode::UnrolledEvent un = ode::unroll_event(tape, nodes, m, *e);
        std::vector<double> inv(e->units());
        for (std::size_t k = 0; k < e->units(); ++k) inv[k] = loss_unit / e->customers[k];
        const ad::NodeId scale = tape.leaf(ad::Tensor::column(inv));
        ad::NodeId total = tape.leaf(ad::Tensor::scalar(0.0));
        for (std::size_t j = 1; j < e->timestamps.size(); ++j) {
            std::vector<double> obs(e->units());
            for (std::size_t k = 0; k < e->units(); ++k) obs[k] = e->outages[k][j];
            const ad::NodeId diff = ad::subtract(tape, tape.leaf(ad::Tensor::column(std::move(obs))), un.outaged[j]);
            total = ad::add(tape, total, ad::sum(tape, ad::square(tape, ad::multiply(tape, diff, scale))));
        }
        const ad::NodeId loss = ad::scale(tape, total, norm);
        out.loss += tape.value(loss).item();
        const std::vector<double> g = ode::gather_gradient(tape.backward(loss), nodes);
        for (std::size_t i = 0; i < g.size(); ++i) out.gradient[i] += g[i];
    }
    return out;
}

/// Relaxed decision-layer data for one event.
struct RelaxedDecision {
    solvers::QpInstance qp;
    solvers::QpSolution solution;
    std::vector<Eigen::Index> forecast_rows; // deployment only
};

inline RelaxedDecision relaxed_decision(const problems::Problem& p, const Series& forecast,
                                        const ode::HazardEvent& frame, double rho) {
    RelaxedDecision r;
    if (p.kind == problems::ProblemKind::Deployment) {
        problems::DeploymentInstance inst =
            problems::build_deployment_instance(p.network, forecast, problems::ShortfallForm::Epigraph);
        r.qp = solvers::QpInstance::relax(inst.milp, rho);
        r.forecast_rows = std::move(inst.forecast_rows);
    } else {
        r.qp = solvers::QpInstance::relax(
            problems::build_undergrounding_instance(forecast, frame.timestamps, frame.customers, p.budget), rho);
    }
    r.solution = solvers::solve_qp(r.qp);
    return r;
}

/// True cost of a continuous decision and its gradient with respect to that decision.
inline double relaxed_cost(const problems::Problem& p, const solvers::Vector& v, const Series& truth,
                           const ode::HazardEvent& frame, solvers::Vector* gradient) {
    if (p.kind == problems::ProblemKind::Deployment) {
        const auto& net = p.network;
        const problems::DeploymentLayout lay(net);
        double cost = 0.0;
        if (gradient) *gradient = solvers::Vector::Zero(v.size());
        for (std::size_t e = 0; e < net.edges.size(); ++e) {
            for (std::size_t t = 1; t <= net.horizon; ++t) {
                cost += net.edges[e].cost * v[lay.shipment(e, t)];
                if (gradient) (*gradient)[lay.shipment(e, t)] = net.edges[e].cost;
            }
        }
        for (std::size_t k = 0; k < net.units; ++k) {
            for (std::size_t t = 1; t <= net.horizon; ++t) {
                const double q = v[lay.stock(k, t)];
                const double gap = truth[k][t] - q * net.generator_capacity;
                cost += net.operation_cost * q + net.interruption_cost * std::max(gap, 0.0);
                if (gradient) {
                    (*gradient)[lay.stock(k, t)] =
                        net.operation_cost - (gap > 0.0 ? net.interruption_cost * net.generator_capacity : 0.0);
                }
            }
        }
        return cost;
    }
    const std::vector<double> a = problems::outage_integrals(truth, frame.timestamps);
    const double K = static_cast<double>(frame.units());
    double cost = 0.0;
    if (gradient) *gradient = solvers::Vector::Zero(v.size());
    for (std::size_t k = 0; k < frame.units(); ++k) {
        const double w = a[k] / (K * frame.customers[k]);
        cost += (1.0 - v[static_cast<Eigen::Index>(k)]) * w;
        if (gradient) (*gradient)[static_cast<Eigen::Index>(k)] = -w;
    }
    return cost;
}

/// d(loss)/d(forecast[k][j]) given the upstream gradient on the relaxed decision.
inline Series forecast_gradient(const problems::Problem& p, const RelaxedDecision& r, const solvers::Vector& upstream,
                                const ode::HazardEvent& frame) {
    const solvers::QpGradient g = solvers::qp_backward(r.solution, r.qp, upstream);
    Series out(frame.units(), std::vector<double>(frame.timestamps.size(), 0.0));
    if (p.kind == problems::ProblemKind::Deployment) {
        const auto& net = p.network;
        // rhs of the epigraph row is -Y / N_g
        for (std::size_t k = 0; k < net.units; ++k) {
            for (std::size_t t = 1; t <= net.horizon; ++t) {
                const Eigen::Index row = r.forecast_rows[k * net.horizon + t - 1];
                out[k][t] = -g.ineq_rhs[row] / net.generator_capacity;
            }
        }
        return out;
    }
    // xi_k = -A_hat_k / (K N_k), A_hat_k = sum_j Y_hat_kj dt_j
    const double K = static_cast<double>(frame.units());
    for (std::size_t k = 0; k < frame.units(); ++k) {
        const double d_area = -g.cost[static_cast<Eigen::Index>(k)] / (K * frame.customers[k]);
        for (std::size_t j = 1; j < frame.timestamps.size(); ++j) {
            out[k][j] = d_area * (frame.timestamps[j] - frame.timestamps[j - 1]);
        }
    }
    return out;
}

/// Relaxed regret g(x_rho(Y_hat), S) - g(x*(S), S) and its gradient in OutageModel::parameters() order.
inline LossAndGradient gdf_loss(const ode::OutageModel& m, const Example& ex, const problems::Problem& p,
                                double rho) {
    ad::Tape tape;
    const ode::ModelNodes nodes = ode::add_model(tape, m);
    const ode::UnrolledEvent un = ode::unroll_event(tape, nodes, m, ex.event);
    const std::size_t K = ex.event.units(), J = ex.event.timestamps.size();
    Series forecast(K, std::vector<double>(J));
    for (std::size_t j = 0; j < J; ++j) {
        const auto& col = tape.value(un.outaged[j]).data();
        for (std::size_t k = 0; k < K; ++k) forecast[k][j] = col[k];
    }

    const RelaxedDecision r = relaxed_decision(p, forecast, ex.event, rho);
    solvers::Vector upstream;
    LossAndGradient out;
    out.loss = relaxed_cost(p, r.solution.x, ex.truth, ex.event, &upstream) - ex.optimal_cost;
    const Series gy = forecast_gradient(p, r, upstream, ex.event);

    // Surrogate sum_kj G_kj * Y_hat_kj carries the forecast gradient back to the parameters.
    ad::NodeId total = tape.leaf(ad::Tensor::scalar(0.0));
    for (std::size_t j = 1; j < J; ++j) {
        std::vector<double> w(K);
        for (std::size_t k = 0; k < K; ++k) w[k] = gy[k][j];
        const ad::NodeId term = ad::sum(tape, ad::multiply(tape, tape.leaf(ad::Tensor::column(std::move(w))), un.outaged[j]));
        total = ad::add(tape, total, term);
    }
    out.gradient = ode::gather_gradient(tape.backward(total), nodes);
    return out;
}

inline double norm(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

/// theta -= lr * g, with g rescaled to at most `clip` in norm when clip > 0.
inline void descend(ode::OutageModel& m, const std::vector<double>& g, double lr, double clip) {
    const double n = norm(g);
    if (!std::isfinite(n)) throw NumericError("gradient is not finite");
    const double factor = (clip > 0.0 && n > clip) ? clip / n : 1.0;
    std::vector<double> theta = m.parameters();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * factor * g[i];
    m.set_parameters(theta);
}

struct CurvePoint {
    std::string phase; // "pretrain" or "finetune"
    std::size_t epoch = 0;
    double train_mse = 0.0;     // raw customers^2
    double train_regret = 0.0;  // relaxed, finetune only
};

using Curve = std::vector<CurvePoint>;

namespace detail {

inline std::vector<std::vector<const ode::HazardEvent*>> batches(std::span<const ode::HazardEvent> events,
                                                                 std::size_t size, std::mt19937_64& rng) {
    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<const ode::HazardEvent*>> out;
    for (std::size_t i = 0; i < order.size(); i += size) {
        std::vector<const ode::HazardEvent*> b;
        for (std::size_t j = i; j < std::min(order.size(), i + size); ++j) b.push_back(&events[order[j]]);
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace detail

/// Mini-batch gradient descent on the scaled MSE.
inline ode::OutageModel pretrain(ode::OutageModel m, std::span<const ode::HazardEvent> events, const TrainConfig& cfg,
                                 Curve* curve = nullptr) {
    cfg.validate();
    if (events.empty()) throw ContractError("pretrain: no events");
    std::mt19937_64 rng(cfg.seed * 2 + 1);
    for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
        double train_mse = 0.0;
        try {
            for (const auto& b : detail::batches(events, cfg.batch_size, rng)) {
                const LossAndGradient lg = mse_gradient(m, b, cfg.loss_unit);
                if (!std::isfinite(lg.loss)) throw NumericError("loss is not finite");
                descend(m, lg.gradient, cfg.pretrain_lr, 0.0);
            }
            train_mse = mse_loss(m, events);
        } catch (const NumericError& e) {
            throw NumericError("pretrain: diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        if (curve) curve->push_back({"pretrain", epoch, train_mse, 0.0});
    }
    return m;
}

/// Per-event regret steps, then lambda-weighted MSE mini-batch steps, per epoch.
inline ode::OutageModel finetune_gdf(ode::OutageModel m, std::span<const Example> examples, const problems::Problem& p,
                                     const TrainConfig& cfg, Curve* curve = nullptr) {
    cfg.validate();
    if (examples.empty()) throw ContractError("finetune_gdf: no events");
    std::vector<ode::HazardEvent> events;
    for (const auto& ex : examples) events.push_back(ex.event);
    std::mt19937_64 rng(cfg.seed * 2 + 2);
    for (std::size_t epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
        double regret = 0.0, train_mse = 0.0;
        try {
            for (const auto& ex : examples) {
                const LossAndGradient lg = gdf_loss(m, ex, p, cfg.rho);
                if (!std::isfinite(lg.loss)) throw NumericError("regret is not finite");
                regret += lg.loss / static_cast<double>(examples.size());
                descend(m, lg.gradient, cfg.finetune_lr, cfg.clip_norm);
            }
            if (cfg.lambda > 0.0) {
                for (const auto& b : detail::batches(events, cfg.batch_size, rng)) {
                    const LossAndGradient lg = mse_gradient(m, b, cfg.loss_unit);
                    descend(m, lg.gradient, cfg.finetune_lr * cfg.lambda, cfg.clip_norm);
                }
            }
            train_mse = mse_loss(m, events);
        } catch (const solvers::DegenerateKkt&) {
            throw;
        } catch (const NumericError& e) {
            throw NumericError("finetune: diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        if (curve) curve->push_back({"finetune", epoch, train_mse, regret});
    }
    return m;
}

struct EventMetrics {
    std::string event_id;
    double mse = 0.0;
    double cost = 0.0;   // deployment cost or SAIDI
    double regret = 0.0;
};

/// Integer decision from a forecast, scored against the example's reference series.
inline EventMetrics score_forecast(const Series& forecast, const Example& ex, const problems::Problem& p) {
    EventMetrics r;
    r.event_id = ex.event.id;
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < ex.event.units(); ++k) {
        for (std::size_t j = 1; j < ex.event.timestamps.size(); ++j) {
            const double d = ex.event.outages[k][j] - forecast[k][j];
            sq += d * d;
            ++count;
        }
    }
    r.mse = sq / static_cast<double>(count);
    const problems::Decision d = problems::decide(p, forecast, ex.event);
    r.cost = problems::decision_cost(p, d, ex.truth, ex.event);
    r.regret = r.cost - ex.optimal_cost;
    return r;
}

inline std::vector<EventMetrics> evaluate(const ode::OutageModel& m, std::span<const Example> examples,
                                          const problems::Problem& p) {
    std::vector<EventMetrics> out;
    for (const auto& ex : examples) out.push_back(score_forecast(forecast_series(m, ex.event), ex, p));
    return out;
}

} // namespace gdf::training
