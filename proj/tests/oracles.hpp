#pragma once

// Independent reference solvers shared by the unit tests and the acceptance run.

#include "gdf/problems.hpp"
#include "gdf/solvers/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace gdf::oracles {

using solvers::kInf;
using solvers::QpInstance;
using solvers::QpSolution;
using namespace gdf::problems;

/// min c'x over {A x <= b}: best feasible vertex among all n-row subsets.
inline double vertex_enumeration(const Vector& c, const Matrix& a, const Vector& b) {
    const Eigen::Index n = c.size(), m = a.rows();
    double best = kInf;
    std::vector<int> pick(static_cast<std::size_t>(n));
    std::function<void(Eigen::Index, Eigen::Index)> rec = [&](Eigen::Index start, Eigen::Index depth) {
        if (depth == n) {
            Matrix sub(n, n);
            Vector rhs(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                sub.row(i) = a.row(pick[static_cast<std::size_t>(i)]);
                rhs[i] = b[pick[static_cast<std::size_t>(i)]];
            }
            Eigen::FullPivLU<Matrix> lu(sub);
            if (lu.rank() < n) return;
            const Vector x = lu.solve(rhs);
            if ((a * x - b).maxCoeff() > 1e-9) return;
            best = std::min(best, c.dot(x));
            return;
        }
        for (Eigen::Index i = start; i < m; ++i) {
            pick[static_cast<std::size_t>(depth)] = static_cast<int>(i);
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

/// Accelerated projected gradient on the dual of min xi'x + rho|x|^2 s.t. N x <= h, E x = e.
inline Vector dual_gradient_oracle(const QpInstance& q, int iterations) {
    const Eigen::Index n = q.cost.size();
    std::vector<Vector> rows;
    std::vector<double> rhs;
    for (Eigen::Index i = 0; i < q.ineq.rows(); ++i) {
        rows.push_back(q.ineq.row(i).transpose());
        rhs.push_back(q.ineq_rhs[i]);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isfinite(q.lower[j])) {
            rows.push_back(-Vector::Unit(n, j));
            rhs.push_back(-q.lower[j]);
        }
        if (std::isfinite(q.upper[j])) {
            rows.push_back(Vector::Unit(n, j));
            rhs.push_back(q.upper[j]);
        }
    }
    const auto mi = static_cast<Eigen::Index>(rows.size()), me = q.eq.rows();
    Matrix a(mi + me, n);
    Vector h(mi + me);
    for (Eigen::Index i = 0; i < mi; ++i) {
        a.row(i) = rows[static_cast<std::size_t>(i)].transpose();
        h[i] = rhs[static_cast<std::size_t>(i)];
    }
    if (me > 0) {
        a.bottomRows(me) = q.eq;
        h.tail(me) = q.eq_rhs;
    }
    const double two_rho = 2.0 * q.rho;
    const double lip = Eigen::JacobiSVD<Matrix>(a).singularValues()[0];
    const double step = two_rho / (lip * lip);
    Vector lam = Vector::Zero(mi + me), prev = lam, y = lam;
    double t = 1.0;
    auto primal = [&](const Vector& l) -> Vector { return -(q.cost + a.transpose() * l) / two_rho; };
    for (int k = 0; k < iterations; ++k) {
        Vector next = y + step * (a * primal(y) - h);
        for (Eigen::Index i = 0; i < mi; ++i) next[i] = std::max(next[i], 0.0);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / tn) * (next - prev);
        prev = next;
        t = tn;
    }
    return primal(prev);
}

inline QpInstance random_qp(std::mt19937_64& rng, Eigen::Index n, Eigen::Index mi, Eigen::Index me) {
    std::normal_distribution<double> nd(0.0, 1.0);
    QpInstance q;
    q.rho = 0.1 + std::abs(nd(rng));
    q.cost = Vector::NullaryExpr(n, [&] { return 3.0 * nd(rng); });
    const Vector interior = Vector::NullaryExpr(n, [&] { return 0.5 * nd(rng); });
    q.ineq = Matrix::NullaryExpr(mi, n, [&] { return nd(rng); });
    q.ineq_rhs = q.ineq * interior + Vector::NullaryExpr(mi, [&] { return std::abs(nd(rng)); });
    q.eq = Matrix::NullaryExpr(me, n, [&] { return nd(rng); });
    q.eq_rhs = q.eq * interior;
    q.lower = Vector::Constant(n, -2.0);
    q.upper = Vector::Constant(n, 2.0);
    return q;
}

/// Exhaustive search over all feasible shipment schedules, period by period.
inline double brute_force_deployment(const DeploymentNetwork& net, const Series& y) {
    const std::size_t E = net.edges.size(), T = net.horizon;
    DeploymentPlan plan = DeploymentPlan::empty(net);
    double best = solvers::kInf;
    const long cap = static_cast<long>(std::min(net.capacity, net.total_stock()));
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t t, std::size_t e) {
        if (t > T) {
            if (plan_violation(net, plan).empty()) best = std::min(best, deployment_cost(net, plan, y));
            return;
        }
        if (e == E) {
            // prune on negative stock up to period t
            const auto q = stock_levels(net, plan);
            for (std::size_t v = 0; v < net.nodes(); ++v) {
                for (std::size_t s = 0; s <= t; ++s) {
                    if (q[v][s] < 0) return;
                }
            }
            rec(t + 1, 0);
            return;
        }
        for (long x = 0; x <= cap; ++x) {
            plan.shipments[e][t - 1] = x;
            rec(t, e + 1);
        }
        plan.shipments[e][t - 1] = 0;
    };
    rec(1, 0);
    return best;
}

/// Best SAIDI over every subset of at most `budget` units.
inline double enumerate_undergrounding(const Series& y, const std::vector<double>& timestamps,
                                       const std::vector<double>& customers, std::size_t budget) {
    const std::size_t K = customers.size();
    double best = kInf;
    for (std::size_t mask = 0; mask < (std::size_t{1} << K); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) > budget) continue;
        UndergroundingPlan p{std::vector<int>(K, 0)};
        for (std::size_t k = 0; k < K; ++k) p.selected[k] = (mask >> k) & 1U ? 1 : 0;
        best = std::min(best, saidi(p, y, timestamps, customers));
    }
    return best;
}

/// KKT residuals of a reported QP solution within solver tolerances.
inline bool kkt_ok(const QpInstance& q, const QpSolution& s) {
    return s.residuals.stationarity <= 1e-7 * (1.0 + q.cost.norm()) && s.residuals.primal <= 1e-8 &&
           s.residuals.complementarity <= 1e-8;
}

} // namespace gdf::oracles
