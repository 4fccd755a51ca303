#pragma once

// Dense bounded-variable primal simplex, two phases.
//
// Pricing is Dantzig (largest reduced cost); after a run of degenerate pivots the
// solver switches to Bland's rule for the remainder of the phase, which rules out
// cycling. All choices are index-deterministic.

#include "gdf/errors.hpp"
#include "gdf/solvers/instance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace gdf::solvers {

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

struct LpOptions {
    double optimality_tol = 1e-9;
    double feasibility_tol = 1e-7;
    double pivot_tol = 1e-9;
    std::size_t degenerate_run_before_bland = 50;
    std::size_t max_iterations = 200000;
};

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Vector x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::size_t iterations = 0;
};

namespace detail {

class BoundedSimplex {
public:
    enum class State : unsigned char { Basic, AtLower, AtUpper };

    BoundedSimplex(Eigen::Index rows, Eigen::Index cols, const LpOptions& opt)
        : opt_(opt), t_(RowMatrix::Zero(rows, cols)), beta_(Vector::Zero(rows)), basis_(static_cast<std::size_t>(rows), -1),
          state_(static_cast<std::size_t>(cols), State::AtLower), ub_(Vector::Constant(cols, kInf)),
          d_(Vector::Zero(cols)), allowed_(static_cast<std::size_t>(cols), true) {}

    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    RowMatrix& tableau() { return t_; }
    Vector& beta() { return beta_; }
    Vector& upper() { return ub_; }
    void set_basic(Eigen::Index row, Eigen::Index col) {
        basis_[static_cast<std::size_t>(row)] = col;
        state_[static_cast<std::size_t>(col)] = State::Basic;
    }
    void forbid(Eigen::Index col) { allowed_[static_cast<std::size_t>(col)] = false; }
    Eigen::Index basic(Eigen::Index row) const { return basis_[static_cast<std::size_t>(row)]; }
    State state(Eigen::Index col) const { return state_[static_cast<std::size_t>(col)]; }
    std::size_t iterations() const noexcept { return iterations_; }

    double value(Eigen::Index col) const {
        switch (state_[static_cast<std::size_t>(col)]) {
        case State::AtLower: return 0.0;
        case State::AtUpper: return ub_[col];
        case State::Basic: break;
        }
        for (Eigen::Index i = 0; i < beta_.size(); ++i) {
            if (basis_[static_cast<std::size_t>(i)] == col) return beta_[i];
        }
        return 0.0;
    }

    /// Minimizes c'y from the current basis. Returns Optimal or Unbounded.
    LpStatus optimize(const Vector& c) {
        price(c);
        bool bland = false;
        std::size_t degenerate_run = 0;
        const Eigen::Index m = t_.rows(), n = t_.cols();
        for (;;) {
            if (++iterations_ > opt_.max_iterations) throw NumericError("simplex: iteration limit reached");

            Eigen::Index q = -1;
            double best = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto s = state_[static_cast<std::size_t>(j)];
                if (s == State::Basic || !allowed_[static_cast<std::size_t>(j)]) continue;
                const double dj = d_[j];
                const bool eligible = (s == State::AtLower && dj < -opt_.optimality_tol) ||
                                      (s == State::AtUpper && dj > opt_.optimality_tol);
                if (!eligible) continue;
                if (bland) {
                    q = j;
                    break;
                }
                if (std::abs(dj) > best) {
                    best = std::abs(dj);
                    q = j;
                }
            }
            if (q < 0) return LpStatus::Optimal;

            const bool increasing = state_[static_cast<std::size_t>(q)] == State::AtLower;
            const double dir = increasing ? 1.0 : -1.0;

            // Ratio test; the entering variable's own bound acts as a candidate with no row.
            double theta = ub_[q];
            Eigen::Index r = -1;
            bool leave_at_upper = false;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double a = dir * t_(i, q);
                double ti;
                bool to_upper;
                if (a > opt_.pivot_tol) {
                    ti = std::max(beta_[i], 0.0) / a;
                    to_upper = false;
                } else if (a < -opt_.pivot_tol) {
                    const double cap = ub_[basis_[static_cast<std::size_t>(i)]];
                    if (cap == kInf) continue;
                    ti = std::max(cap - beta_[i], 0.0) / (-a);
                    to_upper = true;
                } else {
                    continue;
                }
                bool take = false;
                if (ti < theta - 1e-12) {
                    take = true;
                } else if (r >= 0 && ti <= theta + 1e-12) {
                    const auto bi = basis_[static_cast<std::size_t>(i)];
                    const auto br = basis_[static_cast<std::size_t>(r)];
                    take = bland ? bi < br : std::abs(t_(i, q)) > std::abs(t_(r, q));
                }
                if (take) {
                    theta = ti;
                    r = i;
                    leave_at_upper = to_upper;
                }
            }
            if (r < 0 && theta == kInf) return LpStatus::Unbounded;

            degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;
            if (degenerate_run > opt_.degenerate_run_before_bland) bland = true;

            if (theta > 0.0) {
                for (Eigen::Index i = 0; i < m; ++i) beta_[i] -= dir * t_(i, q) * theta;
            }
            if (r < 0) {
                state_[static_cast<std::size_t>(q)] = increasing ? State::AtUpper : State::AtLower;
                continue;
            }
            const double entering_value = increasing ? theta : ub_[q] - theta;
            const Eigen::Index leaving = basis_[static_cast<std::size_t>(r)];
            state_[static_cast<std::size_t>(leaving)] = leave_at_upper ? State::AtUpper : State::AtLower;
            pivot(r, q);
            beta_[r] = entering_value;
        }
    }

    /// Pivot without moving any value (the entering column keeps its bound value).
    void exchange(Eigen::Index r, Eigen::Index q) {
        const double v = value(q);
        const Eigen::Index leaving = basis_[static_cast<std::size_t>(r)];
        state_[static_cast<std::size_t>(leaving)] = State::AtLower;
        pivot(r, q);
        beta_[r] = v;
    }

private:
    void price(const Vector& c) {
        d_ = c;
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            const double cb = c[basis_[static_cast<std::size_t>(i)]];
            if (cb != 0.0) d_.noalias() -= cb * t_.row(i).transpose();
        }
    }

    void pivot(Eigen::Index r, Eigen::Index q) {
        const double piv = t_(r, q);
        t_.row(r) /= piv;
        t_(r, q) = 1.0;
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, q);
            if (f != 0.0) {
                t_.row(i).noalias() -= f * t_.row(r);
                t_(i, q) = 0.0;
            }
        }
        const double dq = d_[q];
        if (dq != 0.0) {
            d_.noalias() -= dq * t_.row(r).transpose();
            d_[q] = 0.0;
        }
        basis_[static_cast<std::size_t>(r)] = q;
        state_[static_cast<std::size_t>(q)] = State::Basic;
    }

    LpOptions opt_;
    RowMatrix t_;
    Vector beta_;
    std::vector<Eigen::Index> basis_;
    std::vector<State> state_;
    Vector ub_;
    Vector d_;
    std::vector<bool> allowed_;
    std::size_t iterations_ = 0;
};

} // namespace detail

/// Solves the LP relaxation of `inst` with the given variable bounds (integrality ignored).
inline LpResult solve_lp(const MilpInstance& inst, const Vector& lower, const Vector& upper, const LpOptions& opt = {}) {
    inst.validate();
    const Eigen::Index n = inst.cost.size();
    if (lower.size() != n || upper.size() != n) throw DimensionError("solve_lp: bound vectors have wrong length");

    LpResult result;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (upper[j] < lower[j]) return result; // empty box
    }

    // Each original variable becomes one or two nonnegative columns: x = offset + sum(sign * y).
    struct Column {
        Eigen::Index original;
        double sign;
        double upper;
    };
    std::vector<Column> columns;
    Vector offset = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::isfinite(lower[j])) {
            offset[j] = lower[j];
            columns.push_back({j, 1.0, upper[j] - lower[j]});
        } else if (std::isfinite(upper[j])) {
            offset[j] = upper[j];
            columns.push_back({j, -1.0, kInf});
        } else {
            columns.push_back({j, 1.0, kInf});
            columns.push_back({j, -1.0, kInf});
        }
    }
    const auto ns = static_cast<Eigen::Index>(columns.size());
    const Eigen::Index mi = inst.ineq.rows(), me = inst.eq.rows(), m = mi + me;

    // Row data after substitution, sign-normalized so every rhs is nonnegative.
    Matrix rows = Matrix::Zero(m, ns);
    Vector rhs(m);
    std::vector<double> slack_sign(static_cast<std::size_t>(mi), 1.0);
    for (Eigen::Index i = 0; i < m; ++i) {
        const bool is_ineq = i < mi;
        const auto coeffs = is_ineq ? inst.ineq.row(i) : inst.eq.row(i - mi);
        double b = is_ineq ? inst.ineq_rhs[i] : inst.eq_rhs[i - mi];
        b -= coeffs.dot(offset);
        for (Eigen::Index c = 0; c < ns; ++c) rows(i, c) = coeffs[columns[static_cast<std::size_t>(c)].original] * columns[static_cast<std::size_t>(c)].sign;
        if (b < 0.0) {
            rows.row(i) *= -1.0;
            b = -b;
            if (is_ineq) slack_sign[static_cast<std::size_t>(i)] = -1.0;
        }
        rhs[i] = b;
    }

    std::vector<Eigen::Index> needs_artificial;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (i >= mi || slack_sign[static_cast<std::size_t>(i)] < 0.0) needs_artificial.push_back(i);
    }
    const Eigen::Index slack0 = ns, art0 = ns + mi;
    const Eigen::Index total = art0 + static_cast<Eigen::Index>(needs_artificial.size());

    detail::BoundedSimplex sx(m, total, opt);
    auto& t = sx.tableau();
    t.leftCols(ns) = rows;
    for (Eigen::Index i = 0; i < mi; ++i) t(i, slack0 + i) = slack_sign[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < ns; ++c) sx.upper()[c] = columns[static_cast<std::size_t>(c)].upper;
    sx.beta() = rhs;
    for (Eigen::Index i = 0; i < mi; ++i) {
        if (slack_sign[static_cast<std::size_t>(i)] > 0.0) sx.set_basic(i, slack0 + i);
    }
    for (std::size_t a = 0; a < needs_artificial.size(); ++a) {
        const Eigen::Index col = art0 + static_cast<Eigen::Index>(a);
        t(needs_artificial[a], col) = 1.0;
        sx.set_basic(needs_artificial[a], col);
    }

    // Columns fixed at zero never need to enter.
    for (Eigen::Index c = 0; c < ns; ++c) {
        if (sx.upper()[c] == 0.0) sx.forbid(c);
    }

    if (total > art0) {
        Vector phase1 = Vector::Zero(total);
        phase1.tail(total - art0).setOnes();
        sx.optimize(phase1);
        double infeasibility = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (sx.basic(i) >= art0) infeasibility += std::max(sx.beta()[i], 0.0);
        }
        if (infeasibility > opt.feasibility_tol * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
            result.iterations = sx.iterations();
            return result;
        }
        // Drive zero-valued artificials out of the basis; rows with no candidate are redundant.
        for (Eigen::Index i = 0; i < m; ++i) {
            if (sx.basic(i) < art0) continue;
            Eigen::Index best = -1;
            double best_abs = 1e-9;
            for (Eigen::Index c = 0; c < art0; ++c) {
                if (sx.state(c) == detail::BoundedSimplex::State::Basic) continue;
                if (std::abs(t(i, c)) > best_abs) {
                    best_abs = std::abs(t(i, c));
                    best = c;
                }
            }
            if (best >= 0) sx.exchange(i, best);
        }
        for (Eigen::Index c = art0; c < total; ++c) {
            sx.forbid(c);
            sx.upper()[c] = 0.0;
        }
    }

    Vector phase2 = Vector::Zero(total);
    for (Eigen::Index c = 0; c < ns; ++c) {
        const auto& col = columns[static_cast<std::size_t>(c)];
        phase2[c] = inst.cost[col.original] * col.sign;
    }
    const LpStatus status = sx.optimize(phase2);
    result.iterations = sx.iterations();
    if (status == LpStatus::Unbounded) {
        result.status = LpStatus::Unbounded;
        return result;
    }

    Vector y(total);
    for (Eigen::Index c = 0; c < total; ++c) y[c] = sx.value(c);
    Vector x = offset;
    for (Eigen::Index c = 0; c < ns; ++c) {
        const auto& col = columns[static_cast<std::size_t>(c)];
        x[col.original] += col.sign * y[c];
    }
    for (Eigen::Index j = 0; j < n; ++j) x[j] = std::clamp(x[j], lower[j], upper[j]);
    result.status = LpStatus::Optimal;
    result.x = std::move(x);
    result.objective = inst.objective(result.x);
    return result;
}

inline LpResult solve_lp(const MilpInstance& inst, const LpOptions& opt = {}) {
    return solve_lp(inst, inst.lower, inst.upper, opt);
}

} // namespace gdf::solvers
