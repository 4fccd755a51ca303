#pragma once

// Compartmental outage dynamics for one service unit:
//
//   dU/dt = -phi_U(z) * Y * U
//   dR/dt =  phi_R(z) * Y
//   dY/dt = -dU/dt - dR/dt
//
// with covariate-conditioned rates phi produced by small sigmoid-headed MLPs.
// Integration is explicit Euler on the observation grid. The same step is
// available on plain doubles (prediction) and on an autodiff tape (training);
// both evaluate the identical expression sequence so their values agree bitwise.

#include "gdf/autodiff.hpp"
#include "gdf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gdf::ode {

struct CompartmentState {
    double unaffected = 0.0; // U
    double outaged = 0.0;    // Y
    double restored = 0.0;   // R

    double total() const noexcept { return unaffected + outaged + restored; }
    friend bool operator==(const CompartmentState&, const CompartmentState&) = default;
};

/// Time derivative of a CompartmentState.
struct StateRate {
    double unaffected = 0.0;
    double outaged = 0.0;
    double restored = 0.0;
};

/// Two-layer perceptron z -> sigmoid(w2 . relu(W1 z + b1) + b2).
/// A hidden width of 0 collapses the network to a single trainable bias.
class RateNetwork {
public:
    RateNetwork() = default;
    RateNetwork(std::size_t inputs, std::size_t hidden)
        : inputs_(inputs), hidden_(hidden), w1_(inputs * hidden, 0.0), b1_(hidden, 0.0), w2_(hidden, 0.0) {}

    /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.
    static RateNetwork initialized(std::size_t inputs, std::size_t hidden, std::mt19937_64& rng) {
        RateNetwork net(inputs, hidden);
        auto fill = [&](std::vector<double>& v, std::size_t fan_in) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& x : v) x = dist(rng);
        };
        fill(net.w1_, inputs);
        fill(net.b1_, inputs);
        fill(net.w2_, hidden);
        std::vector<double> b2(1);
        fill(b2, hidden);
        net.b2_ = b2[0];
        return net;
    }

    std::size_t inputs() const noexcept { return inputs_; }
    std::size_t hidden() const noexcept { return hidden_; }
    std::size_t parameter_count() const noexcept { return w1_.size() + b1_.size() + w2_.size() + 1; }

    /// W1 stored input-major: w1(i, h) multiplies z_i into hidden unit h.
    double& w1(std::size_t i, std::size_t h) { return w1_[i * hidden_ + h]; }
    double& b1(std::size_t h) { return b1_[h]; }
    double& w2(std::size_t h) { return w2_[h]; }
    double& b2() { return b2_; }
    const std::vector<double>& w1_data() const noexcept { return w1_; }
    const std::vector<double>& b1_data() const noexcept { return b1_; }
    const std::vector<double>& w2_data() const noexcept { return w2_; }
    double b2_value() const noexcept { return b2_; }

    /// Pre-sigmoid output.
    double logit(std::span<const double> z) const {
        if (z.size() != inputs_) {
            throw DimensionError("rate network: expected " + std::to_string(inputs_) + " covariates, got " +
                                 std::to_string(z.size()));
        }
        // Summation order matches the tape's matmul so both paths agree bitwise.
        double out = 0.0;
        for (std::size_t h = 0; h < hidden_; ++h) {
            double a = 0.0;
            for (std::size_t i = 0; i < inputs_; ++i) a += z[i] * w1_[i * hidden_ + h];
            a += b1_[h];
            out += (a > 0.0 ? a : 0.0) * w2_[h];
        }
        return out + b2_;
    }

    void pack(std::vector<double>& out) const {
        out.insert(out.end(), w1_.begin(), w1_.end());
        out.insert(out.end(), b1_.begin(), b1_.end());
        out.insert(out.end(), w2_.begin(), w2_.end());
        out.push_back(b2_);
    }

    /// Reads parameter_count() values starting at `pos`; returns the next position.
    std::size_t unpack(std::span<const double> in, std::size_t pos) {
        if (in.size() < pos + parameter_count()) throw DimensionError("rate network: parameter vector too short");
        auto take = [&](std::vector<double>& v) {
            std::copy(in.begin() + static_cast<std::ptrdiff_t>(pos),
                      in.begin() + static_cast<std::ptrdiff_t>(pos + v.size()), v.begin());
            pos += v.size();
        };
        take(w1_);
        take(b1_);
        take(w2_);
        b2_ = in[pos++];
        return pos;
    }

private:
    std::size_t inputs_ = 0;
    std::size_t hidden_ = 0;
    std::vector<double> w1_;
    std::vector<double> b1_;
    std::vector<double> w2_;
    double b2_ = 0.0;
};

/// rate_scale * sigmoid(network(z)); strictly inside (0, rate_scale) for rate_scale > 0.
inline double rate(const RateNetwork& net, std::span<const double> z, double rate_scale) {
    return rate_scale * ad::sigmoid(net.logit(z));
}

/// Upper bounds of the two rates. The failure cap is divided by the unit's customer
/// count so that phi_U * Y * U stays O(N).
struct RateCaps {
    double failure = 5.0;     // per time unit, before the 1/N_k factor
    double restoration = 1.0; // per time unit
};

/// Failure and restoration networks with their caps.
struct OutageModel {
    RateNetwork failure;
    RateNetwork restoration;
    RateCaps caps;

    static OutageModel initialized(std::size_t inputs, std::size_t hidden, std::uint64_t seed, RateCaps caps = {}) {
        std::mt19937_64 rng(seed);
        OutageModel m;
        m.failure = RateNetwork::initialized(inputs, hidden, rng);
        m.restoration = RateNetwork::initialized(inputs, hidden, rng);
        m.caps = caps;
        return m;
    }

    std::size_t inputs() const noexcept { return failure.inputs(); }
    std::size_t parameter_count() const noexcept { return failure.parameter_count() + restoration.parameter_count(); }

    std::vector<double> parameters() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        failure.pack(out);
        restoration.pack(out);
        return out;
    }

    void set_parameters(std::span<const double> theta) {
        if (theta.size() != parameter_count()) {
            throw DimensionError("outage model: expected " + std::to_string(parameter_count()) + " parameters, got " +
                                 std::to_string(theta.size()));
        }
        const std::size_t pos = failure.unpack(theta, 0);
        restoration.unpack(theta, pos);
    }

    double failure_rate(std::span<const double> z, double customers) const {
        return rate(failure, z, caps.failure / customers);
    }
    double restoration_rate(std::span<const double> z) const { return rate(restoration, z, caps.restoration); }
};

/// Right-hand side for given rates. dY is formed as -dU - dR so the three sum to zero exactly.
inline StateRate ode_rhs(const CompartmentState& s, double failure_rate, double restoration_rate) {
    StateRate d;
    d.unaffected = -(failure_rate * (s.unaffected * s.outaged));
    d.restored = restoration_rate * s.outaged;
    d.outaged = -d.unaffected - d.restored;
    return d;
}

inline StateRate ode_rhs(const CompartmentState& s, std::span<const double> z, const OutageModel& model,
                         double customers) {
    return ode_rhs(s, model.failure_rate(z, customers), model.restoration_rate(z));
}

/// One safeguarded Euler step. U is clamped at 0, R at N - U, and Y takes the residue,
/// so the state stays in the simplex and U never increases while R never decreases.
inline CompartmentState euler_step(const CompartmentState& s, double customers, double failure_rate,
                                   double restoration_rate, double dt) {
    const double failures = failure_rate * (s.unaffected * s.outaged);
    const double u_raw = s.unaffected - failures * dt;
    const double u = u_raw > 0.0 ? u_raw : 0.0;
    const double r_raw = s.restored + (restoration_rate * s.outaged) * dt;
    const double room = customers - u;
    const double r = r_raw <= room ? r_raw : room;
    return CompartmentState{u, room - r, r};
}

inline void require_increasing(std::span<const double> timestamps) {
    if (timestamps.empty()) throw ContractError("timestamps: empty grid");
    for (std::size_t j = 1; j < timestamps.size(); ++j) {
        if (!(timestamps[j] > timestamps[j - 1])) {
            throw ContractError("timestamps: not strictly increasing at index " + std::to_string(j));
        }
    }
}

using Trajectory = std::vector<CompartmentState>;

/// Integrates with constant rates over the given grid; result[j] is the state at timestamps[j].
inline Trajectory euler_integrate(const CompartmentState& initial, double customers, double failure_rate,
                                  double restoration_rate, std::span<const double> timestamps) {
    require_increasing(timestamps);
    Trajectory out;
    out.reserve(timestamps.size());
    out.push_back(initial);
    for (std::size_t j = 1; j < timestamps.size(); ++j) {
        out.push_back(euler_step(out.back(), customers, failure_rate, restoration_rate,
                                 timestamps[j] - timestamps[j - 1]));
    }
    return out;
}

inline Trajectory euler_integrate(const CompartmentState& initial, std::span<const double> z, const OutageModel& model,
                                  double customers, std::span<const double> timestamps) {
    return euler_integrate(initial, customers, model.failure_rate(z, customers), model.restoration_rate(z),
                           timestamps);
}

/// Seeded start: Y(0) = max(observed, 1) capped at N, U(0) = N - Y(0), R(0) = 0.
/// [N, 0, 0] would be a fixed point of the dynamics.
inline CompartmentState seeded_state(double customers, double observed_outages) {
    const double y = std::min(customers, std::max(observed_outages, 1.0));
    return CompartmentState{customers - y, y, 0.0};
}

/// One hazard event: static per-unit covariates and an observed outage series per unit.
struct HazardEvent {
    std::string id;
    std::vector<double> timestamps;              // t_0 .. t_T, event-relative
    std::vector<std::vector<double>> covariates; // [unit][feature]
    std::vector<std::vector<double>> outages;    // [unit][timestamp], observed y_k(t_j)
    std::vector<double> customers;               // N_k

    std::size_t units() const noexcept { return customers.size(); }
    std::size_t steps() const noexcept { return timestamps.empty() ? 0 : timestamps.size() - 1; }
    std::size_t features() const noexcept { return covariates.empty() ? 0 : covariates.front().size(); }

    void validate() const {
        const std::size_t k = customers.size();
        if (k == 0) throw DataError("event " + id + ": no units");
        if (covariates.size() != k || outages.size() != k) {
            throw DataError("event " + id + ": covariate/outage rows do not match unit count");
        }
        try {
            require_increasing(timestamps);
        } catch (const ContractError& e) {
            throw DataError("event " + id + ": " + e.what());
        }
        for (std::size_t u = 0; u < k; ++u) {
            if (!(customers[u] > 0.0)) throw DataError("event " + id + ": non-positive customer total");
            if (covariates[u].size() != features()) throw DataError("event " + id + ": ragged covariates");
            if (outages[u].size() != timestamps.size()) {
                throw DataError("event " + id + ": unit " + std::to_string(u) + " has " +
                                std::to_string(outages[u].size()) + " observations for " +
                                std::to_string(timestamps.size()) + " timestamps");
            }
            for (double y : outages[u]) {
                if (!(y >= 0.0 && y <= customers[u])) {
                    throw DataError("event " + id + ": observation outside [0, N_k] for unit " + std::to_string(u));
                }
            }
        }
    }
};

/// Per-unit predicted trajectories, [unit][timestamp].
using Forecast = std::vector<Trajectory>;

inline Forecast predict_event(const OutageModel& model, const HazardEvent& event) {
    if (event.features() != model.inputs()) {
        throw DimensionError("predict_event: event has " + std::to_string(event.features()) +
                             " covariates, model expects " + std::to_string(model.inputs()));
    }
    Forecast out;
    out.reserve(event.units());
    for (std::size_t k = 0; k < event.units(); ++k) {
        const double n = event.customers[k];
        out.push_back(euler_integrate(seeded_state(n, event.outages[k].front()), event.covariates[k], model, n,
                                      event.timestamps));
    }
    return out;
}

/// Outaged-customer series, [unit][timestamp].
inline std::vector<std::vector<double>> outaged_series(const Forecast& f) {
    std::vector<std::vector<double>> y(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        y[k].reserve(f[k].size());
        for (const auto& s : f[k]) y[k].push_back(s.outaged);
    }
    return y;
}

/// z-score statistics per covariate, fitted on training events.
struct CovariateScaler {
    std::vector<double> mean;
    std::vector<double> scale;

    static CovariateScaler identity(std::size_t p) { return {std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)}; }

    static CovariateScaler fit(std::span<const HazardEvent> events) {
        if (events.empty()) throw ContractError("covariate scaler: no events");
        const std::size_t p = events.front().features();
        std::vector<double> sum(p, 0.0), sq(p, 0.0);
        double count = 0.0;
        for (const auto& e : events) {
            for (const auto& z : e.covariates) {
                if (z.size() != p) throw DimensionError("covariate scaler: inconsistent feature count");
                for (std::size_t i = 0; i < p; ++i) {
                    sum[i] += z[i];
                    sq[i] += z[i] * z[i];
                }
                count += 1.0;
            }
        }
        CovariateScaler s{std::vector<double>(p), std::vector<double>(p)};
        for (std::size_t i = 0; i < p; ++i) {
            s.mean[i] = sum[i] / count;
            const double var = std::max(0.0, sq[i] / count - s.mean[i] * s.mean[i]);
            // Constant features pass through centred but unscaled.
            s.scale[i] = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    HazardEvent apply(HazardEvent e) const {
        for (auto& z : e.covariates) {
            if (z.size() != mean.size()) throw DimensionError("covariate scaler: feature count mismatch");
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = (z[i] - mean[i]) / scale[i];
        }
        return e;
    }
};

// ---------------------------------------------------------------------------
// Tape versions
// ---------------------------------------------------------------------------

/// Tape leaves holding one network's parameters.
struct NetworkNodes {
    ad::NodeId w1; // inputs x hidden
    ad::NodeId b1; // 1 x hidden
    ad::NodeId w2; // hidden x 1
    ad::NodeId b2; // 1 x 1
};

struct ModelNodes {
    NetworkNodes failure;
    NetworkNodes restoration;
};

inline NetworkNodes add_network(ad::Tape& tape, const RateNetwork& net) {
    using ad::Tensor;
    return NetworkNodes{
        tape.leaf(Tensor::matrix(net.inputs(), net.hidden(), net.w1_data())),
        tape.leaf(Tensor::matrix(1, net.hidden(), net.b1_data())),
        tape.leaf(Tensor::matrix(net.hidden(), 1, net.w2_data())),
        tape.leaf(Tensor::matrix(1, 1, {net.b2_value()})),
    };
}

inline ModelNodes add_model(ad::Tape& tape, const OutageModel& m) {
    ModelNodes nodes;
    nodes.failure = add_network(tape, m.failure);
    nodes.restoration = add_network(tape, m.restoration);
    return nodes;
}

/// Flattens leaf gradients in OutageModel::parameters() order.
inline std::vector<double> gather_gradient(const ad::Gradients& g, const ModelNodes& nodes) {
    std::vector<double> out;
    for (const NetworkNodes* n : {&nodes.failure, &nodes.restoration}) {
        for (ad::NodeId id : {n->w1, n->b1, n->w2, n->b2}) {
            const auto& t = g.at(id);
            out.insert(out.end(), t.data().begin(), t.data().end());
        }
    }
    return out;
}

/// rate_scale (K x 1, constant) * sigmoid(network(Z)) for the K x p covariate matrix Z.
inline ad::NodeId network_rates(ad::Tape& tape, const NetworkNodes& net, ad::NodeId covariates, ad::NodeId ones,
                                ad::NodeId rate_scale) {
    using namespace ad;
    const NodeId hidden = relu(tape, add(tape, matmul(tape, covariates, net.w1), matmul(tape, ones, net.b1)));
    const NodeId logit = add(tape, matmul(tape, hidden, net.w2), matmul(tape, ones, net.b2));
    return multiply(tape, sigmoid(tape, logit), rate_scale);
}

/// Outaged-customer nodes (K x 1) at every timestamp of an unrolled Euler integration.
struct UnrolledEvent {
    std::vector<ad::NodeId> outaged;
    ad::NodeId failure_rate;
    ad::NodeId restoration_rate;
};

inline UnrolledEvent unroll_event(ad::Tape& tape, const ModelNodes& nodes, const OutageModel& model,
                                  const HazardEvent& event) {
    using namespace ad;
    const std::size_t k = event.units();
    const std::size_t p = model.inputs();
    if (event.features() != p) throw DimensionError("unroll_event: covariate dimension mismatch");

    std::vector<double> z(k * p), fscale(k), rscale(k, model.caps.restoration), u0(k), y0(k), r0(k, 0.0);
    for (std::size_t u = 0; u < k; ++u) {
        std::copy(event.covariates[u].begin(), event.covariates[u].end(), z.begin() + static_cast<std::ptrdiff_t>(u * p));
        fscale[u] = model.caps.failure / event.customers[u];
        const CompartmentState s0 = seeded_state(event.customers[u], event.outages[u].front());
        u0[u] = s0.unaffected;
        y0[u] = s0.outaged;
    }
    const NodeId zn = tape.leaf(Tensor::matrix(k, p, std::move(z)));
    const NodeId ones = tape.leaf(Tensor::filled({k, 1}, 1.0));
    const NodeId customers = tape.leaf(Tensor::column(event.customers));

    UnrolledEvent out;
    out.failure_rate = network_rates(tape, nodes.failure, zn, ones, tape.leaf(Tensor::column(std::move(fscale))));
    out.restoration_rate = network_rates(tape, nodes.restoration, zn, ones, tape.leaf(Tensor::column(std::move(rscale))));

    NodeId u = tape.leaf(Tensor::column(std::move(u0)));
    NodeId y = tape.leaf(Tensor::column(std::move(y0)));
    NodeId r = tape.leaf(Tensor::column(std::move(r0)));
    out.outaged.push_back(y);
    for (std::size_t j = 1; j < event.timestamps.size(); ++j) {
        const double dt = event.timestamps[j] - event.timestamps[j - 1];
        // Mirrors euler_step() expression for expression.
        const NodeId failures = multiply(tape, out.failure_rate, multiply(tape, u, y));
        const NodeId u_next = hinge(tape, subtract(tape, u, scale(tape, failures, dt)));
        const NodeId r_raw = add(tape, r, scale(tape, multiply(tape, out.restoration_rate, y), dt));
        const NodeId room = subtract(tape, customers, u_next);
        const NodeId r_next = minimum(tape, r_raw, room);
        y = subtract(tape, room, r_next);
        u = u_next;
        r = r_next;
        out.outaged.push_back(y);
    }
    return out;
}

} // namespace gdf::ode
