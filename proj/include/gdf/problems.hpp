#pragma once

// The two downstream decision problems and their evaluators.
//
// Deployment: mobile generators move between warehouses and units on a time-expanded
// graph. Periods are t = 1..T; a shipment sent on edge e at period t leaves the origin's
// stock at t and joins the destination's stock at t + travel(e). Shortfall variables are
// measured in generators (customers / N_g) so that every variable lives on a similar scale.
//
// Undergrounding: choose at most C_u units to harden; the objective is the forecast SAIDI
// of the units left exposed.

#include "gdf/errors.hpp"
#include "gdf/ode.hpp"
#include "gdf/solvers/branch_and_bound.hpp"
#include "gdf/solvers/instance.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

namespace gdf::problems {

using solvers::Matrix;
using solvers::MilpInstance;
using solvers::Vector;

/// Per-unit series over the event timestamps, [unit][j] with j = 0..T.
using Series = std::vector<std::vector<double>>;

struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    double cost = 0.0;
    std::size_t travel = 0;
};

/// Nodes 0..units-1 are service units; units..units+warehouses-1 are warehouses.
struct DeploymentNetwork {
    std::size_t units = 1;
    std::size_t warehouses = 1;
    std::size_t horizon = 1;
    std::vector<Edge> edges;
    std::vector<double> stocks;        // Q_w
    double capacity = 5.0;             // C, generators per edge per period
    double generator_capacity = 100.0; // N_g, customers per generator
    double interruption_cost = 1.0;    // tau, per customer-period
    double operation_cost = 2.0;       // gamma, per generator-period on site

    std::size_t nodes() const noexcept { return units + warehouses; }
    bool is_unit(std::size_t v) const noexcept { return v < units; }
    double total_stock() const { return std::accumulate(stocks.begin(), stocks.end(), 0.0); }
    double initial_stock(std::size_t v) const { return is_unit(v) ? 0.0 : stocks[v - units]; }

    /// Every unit linked to every warehouse in both directions with one cost and travel time.
    static DeploymentNetwork star(std::size_t units, std::size_t warehouses, std::size_t horizon, double edge_cost,
                                  std::size_t travel, double stock_per_warehouse) {
        DeploymentNetwork net;
        net.units = units;
        net.warehouses = warehouses;
        net.horizon = horizon;
        net.stocks.assign(warehouses, stock_per_warehouse);
        for (std::size_t w = 0; w < warehouses; ++w) {
            for (std::size_t k = 0; k < units; ++k) {
                net.edges.push_back({units + w, k, edge_cost, travel});
                net.edges.push_back({k, units + w, edge_cost, travel});
            }
        }
        return net;
    }

    void validate() const {
        auto fail = [](const std::string& what) { throw ContractError("deployment network: " + what); };
        if (units == 0) fail("no units");
        if (horizon == 0) fail("empty horizon");
        if (stocks.size() != warehouses) fail("stock list length differs from warehouse count");
        for (double q : stocks) {
            if (!(q >= 0.0) || q != std::floor(q)) fail("warehouse stocks must be nonnegative integers");
        }
        if (!(capacity >= 1.0)) fail("edge capacity must be at least 1");
        if (!(generator_capacity > 0.0)) fail("generator capacity must be positive");
        if (!(interruption_cost >= 0.0) || !(operation_cost >= 0.0)) fail("costs must be nonnegative");
        for (const Edge& e : edges) {
            if (e.from >= nodes() || e.to >= nodes()) fail("edge endpoint out of range");
            if (is_unit(e.from) == is_unit(e.to)) fail("edges must join a unit and a warehouse");
            if (!(e.cost >= 0.0)) fail("edge costs must be nonnegative");
        }
    }
};

/// Column positions of the deployment variables. Periods are 1-based.
struct DeploymentLayout {
    std::size_t edges = 0, nodes = 0, units = 0, horizon = 0;

    explicit DeploymentLayout(const DeploymentNetwork& net)
        : edges(net.edges.size()), nodes(net.nodes()), units(net.units), horizon(net.horizon) {}

    Eigen::Index shipment(std::size_t e, std::size_t t) const { return static_cast<Eigen::Index>(e * horizon + t - 1); }
    Eigen::Index stock(std::size_t v, std::size_t t) const {
        return static_cast<Eigen::Index>((edges + v) * horizon + t - 1);
    }
    Eigen::Index shortfall(std::size_t k, std::size_t t) const {
        return static_cast<Eigen::Index>((edges + nodes + k) * horizon + t - 1);
    }
    Eigen::Index size() const { return static_cast<Eigen::Index>((edges + nodes + units) * horizon); }
};

enum class ShortfallForm {
    Epigraph, // s >= y - q: the plain linearization, used for the differentiable relaxation
    Hull,     // adds the convex-envelope cut of max(y - q, 0) over integer q; same integer optima
};

struct DeploymentInstance {
    MilpInstance milp;
    /// Inequality row of the epigraph cut for (k, t) at index k * T + (t - 1); its rhs is -Y_k(t) / N_g.
    std::vector<Eigen::Index> forecast_rows;
};

/// Forecast values used by the deployment problem: Y_k(t) for t = 1..T.
inline void require_horizon(const Series& y, std::size_t units, std::size_t horizon, const char* who) {
    if (y.size() != units) throw DimensionError(std::string(who) + ": series has wrong unit count");
    for (const auto& row : y) {
        if (row.size() < horizon + 1) throw ContractError(std::string(who) + ": series shorter than the horizon");
        for (std::size_t t = 1; t <= horizon; ++t) {
            if (!(row[t] >= 0.0) || !std::isfinite(row[t])) {
                throw ContractError(std::string(who) + ": outage values must be finite and nonnegative");
            }
        }
    }
}

inline DeploymentInstance build_deployment_instance(const DeploymentNetwork& net, const Series& forecast,
                                                    ShortfallForm form = ShortfallForm::Hull) {
    net.validate();
    require_horizon(forecast, net.units, net.horizon, "build_deployment_instance");
    const DeploymentLayout lay(net);
    const std::size_t T = net.horizon, V = net.nodes(), K = net.units, E = net.edges.size();
    const double ng = net.generator_capacity;

    DeploymentInstance out;
    MilpInstance& m = out.milp;
    m = MilpInstance::with_variables(static_cast<std::size_t>(lay.size()));
    for (std::size_t e = 0; e < E; ++e) {
        const Edge& edge = net.edges[e];
        for (std::size_t t = 1; t <= T; ++t) {
            const Eigen::Index j = lay.shipment(e, t);
            m.cost[j] = edge.cost;
            m.integer[static_cast<std::size_t>(j)] = true;
            // A unit cannot hand back a generator that arrives after the horizon.
            m.upper[j] = (net.is_unit(edge.to) && t + edge.travel > T) ? 0.0 : net.capacity;
        }
    }
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t t = 1; t <= T; ++t) {
            const Eigen::Index j = lay.stock(v, t);
            m.integer[static_cast<std::size_t>(j)] = true;
            m.upper[j] = net.total_stock();
            if (net.is_unit(v)) m.cost[j] = net.operation_cost;
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 1; t <= T; ++t) m.cost[lay.shortfall(k, t)] = net.interruption_cost * ng;
    }

    // Stock recursion for every node and period, then per-node flow conservation.
    const Eigen::Index n = lay.size();
    m.eq = Matrix::Zero(static_cast<Eigen::Index>(V * T + V), n);
    m.eq_rhs = Vector::Zero(m.eq.rows());
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t t = 1; t <= T; ++t) {
            const auto row = static_cast<Eigen::Index>(v * T + t - 1);
            m.eq(row, lay.stock(v, t)) = 1.0;
            if (t > 1) m.eq(row, lay.stock(v, t - 1)) = -1.0;
            else m.eq_rhs[row] = net.initial_stock(v);
            for (std::size_t e = 0; e < E; ++e) {
                const Edge& edge = net.edges[e];
                if (edge.from == v) m.eq(row, lay.shipment(e, t)) += 1.0;
                if (edge.to == v && t > edge.travel) m.eq(row, lay.shipment(e, t - edge.travel)) -= 1.0;
            }
        }
        const auto row = static_cast<Eigen::Index>(V * T + v);
        for (std::size_t e = 0; e < E; ++e) {
            for (std::size_t t = 1; t <= T; ++t) {
                if (net.edges[e].to == v) m.eq(row, lay.shipment(e, t)) += 1.0;
                if (net.edges[e].from == v) m.eq(row, lay.shipment(e, t)) -= 1.0;
            }
        }
    }

    // Shortfall cuts.
    std::vector<std::pair<Eigen::Index, double>> hull; // (k*T + t-1, fractional part) needing the second cut
    const double q_total = net.total_stock();
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 1; t <= T; ++t) {
            const double y = forecast[k][t] / ng;
            const double whole = std::floor(y), frac = y - whole;
            if (form == ShortfallForm::Hull && frac > 1e-12 && whole < q_total) {
                hull.emplace_back(static_cast<Eigen::Index>(k * T + t - 1), frac);
            }
        }
    }
    const auto cuts = static_cast<Eigen::Index>(K * T + hull.size());
    m.ineq = Matrix::Zero(cuts, n);
    m.ineq_rhs = Vector::Zero(cuts);
    out.forecast_rows.resize(K * T);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 1; t <= T; ++t) {
            const auto row = static_cast<Eigen::Index>(k * T + t - 1);
            m.ineq(row, lay.stock(k, t)) = -1.0;
            m.ineq(row, lay.shortfall(k, t)) = -1.0;
            m.ineq_rhs[row] = -forecast[k][t] / ng;
            out.forecast_rows[static_cast<std::size_t>(row)] = row;
        }
    }
    // s >= frac * (floor(y) + 1 - q): the segment of the envelope between floor(y) and floor(y) + 1.
    for (std::size_t h = 0; h < hull.size(); ++h) {
        const auto [cell, frac] = hull[h];
        const std::size_t k = static_cast<std::size_t>(cell) / T, t = static_cast<std::size_t>(cell) % T + 1;
        const auto row = static_cast<Eigen::Index>(K * T + h);
        const double whole = std::floor(forecast[k][t] / ng);
        m.ineq(row, lay.stock(k, t)) = -frac;
        m.ineq(row, lay.shortfall(k, t)) = -1.0;
        m.ineq_rhs[row] = -frac * (whole + 1.0);
    }
    return out;
}

/// Integer shipment schedule, shipments[e][t-1].
struct DeploymentPlan {
    std::vector<std::vector<long>> shipments;

    static DeploymentPlan empty(const DeploymentNetwork& net) {
        return {std::vector<std::vector<long>>(net.edges.size(), std::vector<long>(net.horizon, 0))};
    }
    long total_shipped() const {
        long s = 0;
        for (const auto& row : shipments) s = std::accumulate(row.begin(), row.end(), s);
        return s;
    }
    friend bool operator==(const DeploymentPlan&, const DeploymentPlan&) = default;
};

/// Stock at every node after each period, [v][t] for t = 0..T. Arrivals beyond T are not counted.
inline std::vector<std::vector<long>> stock_levels(const DeploymentNetwork& net, const DeploymentPlan& plan) {
    const std::size_t T = net.horizon;
    std::vector<std::vector<long>> q(net.nodes(), std::vector<long>(T + 1, 0));
    for (std::size_t v = 0; v < net.nodes(); ++v) q[v][0] = static_cast<long>(net.initial_stock(v));
    for (std::size_t t = 1; t <= T; ++t) {
        for (std::size_t v = 0; v < net.nodes(); ++v) q[v][t] = q[v][t - 1];
        for (std::size_t e = 0; e < net.edges.size(); ++e) {
            const Edge& edge = net.edges[e];
            q[edge.from][t] -= plan.shipments[e][t - 1];
            if (t > edge.travel) q[edge.to][t] += plan.shipments[e][t - 1 - edge.travel];
        }
    }
    return q;
}

/// Independent feasibility check by simulation. Returns an empty string when feasible.
inline std::string plan_violation(const DeploymentNetwork& net, const DeploymentPlan& plan) {
    if (plan.shipments.size() != net.edges.size()) return "shipment rows differ from edge count";
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        if (plan.shipments[e].size() != net.horizon) return "shipment row length differs from horizon";
        for (std::size_t t = 1; t <= net.horizon; ++t) {
            const long x = plan.shipments[e][t - 1];
            if (x < 0 || static_cast<double>(x) > net.capacity) {
                return "edge " + std::to_string(e) + " period " + std::to_string(t) + " exceeds capacity";
            }
        }
    }
    const auto q = stock_levels(net, plan);
    for (std::size_t v = 0; v < net.nodes(); ++v) {
        for (std::size_t t = 0; t <= net.horizon; ++t) {
            if (q[v][t] < 0) return "node " + std::to_string(v) + " stock negative at period " + std::to_string(t);
        }
        long in = 0, out = 0;
        for (std::size_t e = 0; e < net.edges.size(); ++e) {
            const long sent = std::accumulate(plan.shipments[e].begin(), plan.shipments[e].end(), 0L);
            if (net.edges[e].to == v) in += sent;
            if (net.edges[e].from == v) out += sent;
        }
        if (in != out) return "node " + std::to_string(v) + " violates flow conservation";
    }
    return {};
}

struct DeploymentCost {
    double transport = 0.0;
    double operation = 0.0;
    double outage = 0.0;
    double total() const noexcept { return transport + operation + outage; }
};

/// Transport + operation + outage cost of a plan against outages y (y[k][t], t = 1..T used).
inline DeploymentCost deployment_cost_breakdown(const DeploymentNetwork& net, const DeploymentPlan& plan,
                                                const Series& y) {
    net.validate();
    if (const std::string why = plan_violation(net, plan); !why.empty()) {
        throw ContractError("deployment_cost: infeasible plan: " + why);
    }
    require_horizon(y, net.units, net.horizon, "deployment_cost");
    DeploymentCost c;
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        for (long x : plan.shipments[e]) c.transport += net.edges[e].cost * static_cast<double>(x);
    }
    const auto q = stock_levels(net, plan);
    for (std::size_t k = 0; k < net.units; ++k) {
        for (std::size_t t = 1; t <= net.horizon; ++t) {
            const double cover = static_cast<double>(q[k][t]);
            c.operation += net.operation_cost * cover;
            c.outage += net.interruption_cost * std::max(y[k][t] - cover * net.generator_capacity, 0.0);
        }
    }
    return c;
}

inline double deployment_cost(const DeploymentNetwork& net, const DeploymentPlan& plan, const Series& y) {
    return deployment_cost_breakdown(net, plan, y).total();
}

inline DeploymentPlan plan_from_solution(const DeploymentNetwork& net, const Vector& x) {
    const DeploymentLayout lay(net);
    DeploymentPlan plan = DeploymentPlan::empty(net);
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        for (std::size_t t = 1; t <= net.horizon; ++t) {
            plan.shipments[e][t - 1] = std::lround(x[lay.shipment(e, t)]);
        }
    }
    return plan;
}

inline DeploymentPlan solve_deployment(const DeploymentNetwork& net, const Series& forecast,
                                       const solvers::MilpOptions& opt = {}) {
    const DeploymentInstance inst = build_deployment_instance(net, forecast, ShortfallForm::Hull);
    const solvers::MilpResult r = solvers::solve_milp(inst.milp, opt);
    if (r.status != solvers::MilpStatus::Optimal) {
        throw NumericError(std::string("solve_deployment: MILP ") + solvers::to_string(r.status));
    }
    return plan_from_solution(net, r.x);
}

// ---------------------------------------------------------------------------
// Undergrounding
// ---------------------------------------------------------------------------

/// A_k = sum_{j=1..T} y_k(t_j) (t_j - t_{j-1}).
inline std::vector<double> outage_integrals(const Series& y, std::span<const double> timestamps) {
    std::vector<double> a(y.size(), 0.0);
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (y[k].size() != timestamps.size()) throw DimensionError("outage_integrals: series length mismatch");
        for (std::size_t j = 1; j < timestamps.size(); ++j) a[k] += y[k][j] * (timestamps[j] - timestamps[j - 1]);
    }
    return a;
}

/// min (1/K) sum_k (1 - x_k) A_k / N_k  s.t.  sum x <= budget, x binary. The constant part is the offset.
inline MilpInstance build_undergrounding_instance(const Series& forecast, std::span<const double> timestamps,
                                                  std::span<const double> customers, std::size_t budget) {
    const std::size_t K = customers.size();
    if (forecast.size() != K) throw DimensionError("build_undergrounding_instance: unit count mismatch");
    if (budget > K) throw ContractError("build_undergrounding_instance: budget exceeds unit count");
    const std::vector<double> a = outage_integrals(forecast, timestamps);
    MilpInstance m = MilpInstance::with_variables(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double w = a[k] / (static_cast<double>(K) * customers[k]);
        m.cost[static_cast<Eigen::Index>(k)] = -w;
        m.offset += w;
        m.upper[static_cast<Eigen::Index>(k)] = 1.0;
        m.integer[k] = true;
    }
    m.ineq = Matrix::Ones(1, static_cast<Eigen::Index>(K));
    m.ineq_rhs = Vector::Constant(1, static_cast<double>(budget));
    return m;
}

struct UndergroundingPlan {
    std::vector<int> selected; // x_k in {0, 1}
    friend bool operator==(const UndergroundingPlan&, const UndergroundingPlan&) = default;
};

inline double saidi(const UndergroundingPlan& plan, const Series& y, std::span<const double> timestamps,
                    std::span<const double> customers) {
    const std::size_t K = customers.size();
    if (plan.selected.size() != K || y.size() != K) throw DimensionError("saidi: unit count mismatch");
    const std::vector<double> a = outage_integrals(y, timestamps);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        if (plan.selected[k] != 0 && plan.selected[k] != 1) throw ContractError("saidi: selection must be binary");
        s += (1.0 - plan.selected[k]) * a[k] / customers[k];
    }
    return s / static_cast<double>(K);
}

/// Among units with equal per-capita damage, prefer the lower index.
inline void canonicalize_ties(UndergroundingPlan& plan, const std::vector<double>& per_capita) {
    const std::size_t K = plan.selected.size();
    for (std::size_t lo = 0; lo < K; ++lo) {
        if (plan.selected[lo]) continue;
        for (std::size_t hi = lo + 1; hi < K; ++hi) {
            if (!plan.selected[hi]) continue;
            const double scale = std::max({1.0, std::abs(per_capita[lo]), std::abs(per_capita[hi])});
            if (std::abs(per_capita[lo] - per_capita[hi]) <= 1e-12 * scale) {
                std::swap(plan.selected[lo], plan.selected[hi]);
                break;
            }
        }
    }
}

inline UndergroundingPlan solve_undergrounding(const Series& forecast, std::span<const double> timestamps,
                                               std::span<const double> customers, std::size_t budget,
                                               const solvers::MilpOptions& opt = {}) {
    const MilpInstance m = build_undergrounding_instance(forecast, timestamps, customers, budget);
    const solvers::MilpResult r = solvers::solve_milp(m, opt);
    if (r.status != solvers::MilpStatus::Optimal) throw NumericError("solve_undergrounding: MILP not optimal");
    UndergroundingPlan plan;
    for (Eigen::Index k = 0; k < r.x.size(); ++k) plan.selected.push_back(static_cast<int>(std::lround(r.x[k])));
    std::vector<double> per_capita(customers.size());
    const std::vector<double> a = outage_integrals(forecast, timestamps);
    for (std::size_t k = 0; k < customers.size(); ++k) per_capita[k] = a[k] / customers[k];
    canonicalize_ties(plan, per_capita);
    return plan;
}

// ---------------------------------------------------------------------------
// Problem-agnostic front
// ---------------------------------------------------------------------------

enum class ProblemKind { Deployment, Undergrounding };

inline const char* to_string(ProblemKind k) { return k == ProblemKind::Deployment ? "deployment" : "undergrounding"; }

struct Problem {
    ProblemKind kind = ProblemKind::Deployment;
    DeploymentNetwork network;  // deployment
    std::size_t budget = 1;     // undergrounding C_u
};

using Decision = std::variant<DeploymentPlan, UndergroundingPlan>;

/// Optimal integer decision for the given outage series on the event's grid.
inline Decision decide(const Problem& p, const Series& y, const ode::HazardEvent& frame,
                       const solvers::MilpOptions& opt = {}) {
    if (p.kind == ProblemKind::Deployment) return solve_deployment(p.network, y, opt);
    return solve_undergrounding(y, frame.timestamps, frame.customers, p.budget, opt);
}

/// Deployment cost or SAIDI of `d` against the outages `truth`.
inline double decision_cost(const Problem& p, const Decision& d, const Series& truth, const ode::HazardEvent& frame) {
    if (p.kind == ProblemKind::Deployment) return deployment_cost(p.network, std::get<DeploymentPlan>(d), truth);
    return saidi(std::get<UndergroundingPlan>(d), truth, frame.timestamps, frame.customers);
}

/// g(x*(forecast), truth) - g(x*(truth), truth).
inline double regret(const Problem& p, const Series& forecast, const Series& truth, const ode::HazardEvent& frame,
                     const solvers::MilpOptions& opt = {}) {
    const Decision mine = decide(p, forecast, frame, opt);
    const Decision best = decide(p, truth, frame, opt);
    return decision_cost(p, mine, truth, frame) - decision_cost(p, best, truth, frame);
}

} // namespace gdf::problems
