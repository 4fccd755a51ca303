#pragma once

// Comparison policies: two-stage (MSE-trained forecast fed to the exact MILP) and the
// reactive observe-then-optimize heuristic for generator deployment.

#include "gdf/errors.hpp"
#include "gdf/ode.hpp"
#include "gdf/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gdf::baselines {

using problems::DeploymentNetwork;
using problems::DeploymentPlan;
using problems::Series;

/// Forecast with the MSE-trained model, then solve the integer problem on it.
inline problems::Decision two_stage(const ode::OutageModel& mse_model, const ode::HazardEvent& event,
                                    const problems::Problem& p) {
    return problems::decide(p, ode::outaged_series(ode::predict_event(mse_model, event)), event);
}

/// Greedy lagged policy. At period t the unit demand is ceil(y(t - L) / N_g) minus the
/// generators already committed to it (on site or in transit); warehouses fill demand in
/// ascending unit order and their stock drops at dispatch. Nothing is returned until the
/// horizon ends, when every generator on site goes back to the warehouse it came from.
inline DeploymentPlan online_policy(const DeploymentNetwork& net, const Series& observed, std::size_t lag) {
    net.validate();
    if (lag < 1) throw ContractError("online_policy: lag must be at least 1");
    problems::require_horizon(observed, net.units, net.horizon, "online_policy");
    const std::size_t T = net.horizon, K = net.units;

    // outbound[k][w], inbound[k][w]: edge indices warehouse -> unit and back
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::vector<std::size_t>> outbound(K, std::vector<std::size_t>(net.warehouses, kNone));
    std::vector<std::vector<std::size_t>> inbound = outbound;
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
        const auto& edge = net.edges[e];
        if (net.is_unit(edge.to)) outbound[edge.to][edge.from - K] = e;
        else inbound[edge.from][edge.to - K] = e;
    }

    DeploymentPlan plan = DeploymentPlan::empty(net);
    std::vector<long> warehouse(net.warehouses);
    for (std::size_t w = 0; w < net.warehouses; ++w) warehouse[w] = static_cast<long>(net.stocks[w]);
    std::vector<long> committed(K, 0);
    std::vector<std::vector<long>> borrowed(K, std::vector<long>(net.warehouses, 0));

    for (std::size_t t = 1; t <= T; ++t) {
        if (t < lag) continue; // nothing observed yet
        for (std::size_t k = 0; k < K; ++k) {
            const double y = observed[k][t - lag];
            long need = std::max(0L, static_cast<long>(std::ceil(y / net.generator_capacity - 1e-9)) - committed[k]);
            for (std::size_t w = 0; w < net.warehouses && need > 0; ++w) {
                const std::size_t e = outbound[k][w];
                if (e == kNone || t + net.edges[e].travel > T) continue;
                const long room = static_cast<long>(net.capacity) - plan.shipments[e][t - 1];
                const long send = std::min({need, warehouse[w], room});
                if (send <= 0) continue;
                plan.shipments[e][t - 1] += send;
                warehouse[w] -= send;
                committed[k] += send;
                borrowed[k][w] += send;
                need -= send;
            }
        }
    }

    // Forced returns: as late as possible, spreading backwards when edge capacity binds.
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t w = 0; w < net.warehouses; ++w) {
            long left = borrowed[k][w];
            if (left == 0) continue;
            const std::size_t e = inbound[k][w];
            if (e == kNone) throw ContractError("online_policy: no return edge from a supplied unit");
            for (std::size_t t = T; t >= 1 && left > 0; --t) {
                const long send = std::min(left, static_cast<long>(net.capacity) - plan.shipments[e][t - 1]);
                plan.shipments[e][t - 1] += send;
                left -= send;
            }
        }
    }
    return plan;
}

} // namespace gdf::baselines
