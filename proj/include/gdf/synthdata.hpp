#pragma once

// Synthetic hazard events from a ground-truth compartmental process whose rates depend
// on per-unit weather covariates.

#include "gdf/errors.hpp"
#include "gdf/ode.hpp"
#include "gdf/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gdf::synth {

struct SyntheticConfig {
    std::size_t units = 3;
    std::size_t features = 3;
    std::size_t horizon = 24; // number of steps after t_0
    double dt = 1.0;
    std::size_t events = 16;
    double customers_min = 800.0;
    double customers_max = 1500.0;
    double initial_fraction = 0.01; // outage share at t_0, the event-start trigger
    double noise = 0.2;             // sigma of the multiplicative lognormal noise
    std::size_t substeps = 10;      // Euler substeps per grid step for the hidden truth
    // phi_U = failure_cap * sigmoid(w.z + w0) / N,  phi_R = restoration_cap * sigmoid(v.z + v0)
    double failure_cap = 1.2;
    double restoration_cap = 0.35;
    std::vector<double> failure_weights{1.5, 0.8, -0.6};
    double failure_bias = 0.0;
    std::vector<double> restoration_weights{-1.2, 0.4, 0.7};
    double restoration_bias = -0.3;
    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& what) { throw ConfigError("synthetic config: " + what); };
        if (units < 1) fail("units must be at least 1");
        if (events < 2) fail("need at least two events (one train, one test)");
        if (features < 1) fail("features must be at least 1");
        if (horizon < 1) fail("horizon must be at least 1");
        if (!(dt > 0.0)) fail("dt must be positive");
        if (!(noise >= 0.0)) fail("noise must be nonnegative");
        if (!(customers_min > 0.0) || customers_max < customers_min) fail("invalid customer range");
        if (!(initial_fraction > 0.0 && initial_fraction < 1.0)) fail("initial_fraction must lie in (0, 1)");
        if (substeps < 1) fail("substeps must be at least 1");
        if (failure_weights.size() != features || restoration_weights.size() != features) {
            fail("truth weight vectors must have one entry per feature");
        }
        if (!(failure_cap > 0.0) || !(restoration_cap > 0.0)) fail("rate caps must be positive");
    }
};

/// Observed event plus the hidden noise-free outage series.
struct SyntheticEvent {
    ode::HazardEvent observed;
    problems::Series truth; // hidden Y_k(t_j)
    std::vector<double> failure_rates;
    std::vector<double> restoration_rates;
};

/// Customer totals of the service units; fixed by the config seed and shared by every event.
inline std::vector<double> unit_customers(const SyntheticConfig& c) {
    std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(c.customers_min, c.customers_max);
    std::vector<double> n(c.units);
    for (double& x : n) x = std::round(u(rng));
    return n;
}

/// Uniform[0, 1] covariates centred and scaled with the distribution's own moments.
inline double standardized(double u) { return (u - 0.5) * std::sqrt(12.0); }

inline std::pair<double, double> truth_rates(const SyntheticConfig& c, std::span<const double> raw, double customers) {
    double a = c.failure_bias, b = c.restoration_bias;
    for (std::size_t i = 0; i < c.features; ++i) {
        const double z = standardized(raw[i]);
        a += c.failure_weights[i] * z;
        b += c.restoration_weights[i] * z;
    }
    return {c.failure_cap * ad::sigmoid(a) / customers, c.restoration_cap * ad::sigmoid(b)};
}

inline std::uint64_t event_seed(const SyntheticConfig& c, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                      static_cast<std::uint32_t>(index), 0x5eedu};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline SyntheticEvent generate_event(const SyntheticConfig& c, std::size_t index) {
    c.validate();
    std::mt19937_64 rng(event_seed(c, index));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SyntheticEvent ev;
    ode::HazardEvent& e = ev.observed;
    e.id = std::to_string(index);
    e.customers = unit_customers(c);
    for (std::size_t j = 0; j <= c.horizon; ++j) e.timestamps.push_back(c.dt * static_cast<double>(j));

    const double h = c.dt / static_cast<double>(c.substeps);
    for (std::size_t k = 0; k < c.units; ++k) {
        std::vector<double> raw(c.features);
        for (double& x : raw) x = unif(rng);
        const double n = e.customers[k];
        const auto [fr, rr] = truth_rates(c, raw, n);
        ev.failure_rates.push_back(fr);
        ev.restoration_rates.push_back(rr);

        const double y0 = c.initial_fraction * n;
        ode::CompartmentState s{n - y0, y0, 0.0};
        std::vector<double> hidden{s.outaged};
        for (std::size_t j = 1; j <= c.horizon; ++j) {
            for (std::size_t sub = 0; sub < c.substeps; ++sub) s = ode::euler_step(s, n, fr, rr, h);
            hidden.push_back(s.outaged);
        }
        // The t_0 reading is the start trigger and is kept exact.
        std::vector<double> obs(hidden.size());
        obs[0] = hidden[0];
        for (std::size_t j = 1; j < hidden.size(); ++j) {
            const double eps = gauss(rng);
            obs[j] = c.noise == 0.0 ? hidden[j] : std::clamp(hidden[j] * std::exp(c.noise * eps), 0.0, n);
        }
        e.covariates.push_back(std::move(raw));
        e.outages.push_back(std::move(obs));
        ev.truth.push_back(std::move(hidden));
    }
    return ev;
}

inline std::vector<SyntheticEvent> generate(const SyntheticConfig& c) {
    std::vector<SyntheticEvent> out;
    out.reserve(c.events);
    for (std::size_t i = 0; i < c.events; ++i) out.push_back(generate_event(c, i));
    return out;
}

/// Number of leading events used for training: floor(fraction * I), kept within [1, I - 1].
inline std::size_t train_count(std::size_t events, double train_fraction) {
    if (events < 2) throw ContractError("split: need at least two events");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractError("split: fraction must lie in (0, 1)");
    const auto n = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(events) + 1e-9));
    return std::clamp<std::size_t>(n, 1, events - 1);
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& events, double train_fraction) {
    const std::size_t n = train_count(events.size(), train_fraction);
    return {std::vector<T>(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(n)),
            std::vector<T>(events.begin() + static_cast<std::ptrdiff_t>(n), events.end())};
}

} // namespace gdf::synth
