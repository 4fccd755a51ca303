#pragma once

// Strongly convex QP  min xi'x + rho|x|^2  by the Goldfarb-Idnani dual active-set method,
// and the implicit-KKT backward pass through its solution.

#include "gdf/errors.hpp"
#include "gdf/solvers/instance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace gdf::solvers {

/// The constraint system admits no point.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// The active constraint normals are (numerically) linearly dependent.
class DegenerateKkt : public NumericError {
public:
    using NumericError::NumericError;
};

enum class ConstraintKind : unsigned char { Equality, Inequality, Lower, Upper };

struct ConstraintRef {
    ConstraintKind kind;
    Eigen::Index index;
    auto operator<=>(const ConstraintRef&) const = default;
};

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
};

/// Multipliers follow the "<=" convention: stationarity is xi + 2 rho x + E'l_eq + H'l_in - l_lo + l_up = 0.
struct QpSolution {
    Vector x;
    Vector eq_duals;
    Vector ineq_duals;
    Vector lower_duals;
    Vector upper_duals;
    std::vector<ConstraintRef> active; // linearly independent working set at the optimum
    std::vector<Eigen::Index> fixed;   // variables with lower == upper, eliminated before the solve
    KktResiduals residuals;
    double objective = 0.0;
    std::size_t iterations = 0;
};

struct QpOptions {
    std::size_t max_iterations = 200000;
    double feasibility_tol = 1e-10;
    bool polish = true;
};

namespace detail {

/// Working data of Goldfarb-Idnani in ">= 0" form over the reduced variables.
class GoldfarbIdnani {
public:
    GoldfarbIdnani(double two_rho, const Vector& g0, const Matrix& ce, const Vector& ce0, const Matrix& ci,
                   const Vector& ci0, const QpOptions& opt)
        : n_(g0.size()), ce_(ce), ce0_(ce0), ci_(ci), ci0_(ci0), opt_(opt), two_rho_(two_rho) {
        J_ = Matrix::Identity(n_, n_) / std::sqrt(two_rho);
        R_ = Matrix::Zero(n_, n_);
        x_ = -g0 / two_rho;
        const Eigen::Index total = ce.cols() + ci.cols();
        u_ = Vector::Zero(total + 1);
        a_.assign(static_cast<std::size_t>(total + 1), 0);
        d_ = Vector::Zero(n_);
        z_ = Vector::Zero(n_);
        r_ = Vector::Zero(total + 1);
    }

    void solve() {
        const Eigen::Index p = ce_.cols(), m = ci_.cols();
        for (Eigen::Index i = 0; i < p; ++i) {
            const Vector np = ce_.col(i);
            compute_d(np);
            update_z();
            update_r();
            double t2 = 0.0;
            const double zn = z_.dot(np);
            if (std::abs(zn) > 1e-300) t2 = (-np.dot(x_) - ce0_[i]) / zn;
            x_ += t2 * z_;
            u_[iq_] = t2;
            u_.head(iq_) -= t2 * r_.head(iq_);
            a_[static_cast<std::size_t>(iq_)] = -i - 1;
            if (!add_constraint()) throw DegenerateKkt("qp: equality constraints are linearly dependent");
        }

        std::vector<Eigen::Index> iai(static_cast<std::size_t>(m));
        std::vector<bool> iaexcl(static_cast<std::size_t>(m), true);
        for (Eigen::Index i = 0; i < m; ++i) iai[static_cast<std::size_t>(i)] = i;
        Vector s(m);
        Eigen::Index ip = 0;

        Vector x_old, u_old;
        std::vector<Eigen::Index> a_old;
        for (;;) { // step 1
            if (++iterations_ > opt_.max_iterations) throw NumericError("qp: iteration limit reached");
            for (Eigen::Index i = p; i < iq_; ++i) iai[static_cast<std::size_t>(a_[static_cast<std::size_t>(i)])] = -1;
            if (m > 0) s.noalias() = ci_.transpose() * x_ + ci0_;
            std::fill(iaexcl.begin(), iaexcl.end(), true);
            x_old = x_;
            u_old = u_;
            a_old = a_;

            bool restart = false;
            while (!restart) { // step 2: most violated inactive constraint
                double ss = 0.0;
                ip = -1;
                for (Eigen::Index i = 0; i < m; ++i) {
                    const auto iu = static_cast<std::size_t>(i);
                    if (iai[iu] == -1 || !iaexcl[iu]) continue;
                    const double tol = opt_.feasibility_tol * (1.0 + std::abs(ci0_[i]));
                    if (s[i] < -tol && s[i] < ss) {
                        ss = s[i];
                        ip = i;
                    }
                }
                if (ip < 0) return;
                const Vector np = ci_.col(ip);
                u_[iq_] = 0.0;
                a_[static_cast<std::size_t>(iq_)] = ip;

                for (;;) { // step 2a
                    compute_d(np);
                    update_z();
                    update_r();
                    // dual step: the blocking constraint in the working set
                    Eigen::Index l = -1;
                    double t1 = kInf;
                    for (Eigen::Index k = p; k < iq_; ++k) {
                        if (r_[k] > 0.0 && u_[k] / r_[k] < t1) {
                            t1 = u_[k] / r_[k];
                            l = a_[static_cast<std::size_t>(k)];
                        }
                    }
                    const double zn = z_.dot(np);
                    // a normal already in the span of the working set only admits a dual step
                    const bool independent = d_.tail(n_ - iq_).norm() > 1e-11 * std::max(1.0, r_norm_);
                    const double t2 = independent ? -s[ip] / zn : kInf;
                    const double t = std::min(t1, t2);
                    if (t == kInf) throw InfeasibleError("qp: constraints are infeasible");

                    if (t2 == kInf) { // dual-only step
                        u_.head(iq_) -= t * r_.head(iq_);
                        u_[iq_] += t;
                        iai[static_cast<std::size_t>(l)] = l;
                        delete_constraint(l);
                        continue;
                    }
                    x_ += t * z_;
                    u_.head(iq_) -= t * r_.head(iq_);
                    u_[iq_] += t;
                    if (t == t2) { // full step: the violated constraint becomes active
                        if (!add_constraint()) {
                            iaexcl[static_cast<std::size_t>(ip)] = false;
                            delete_constraint(ip);
                            for (Eigen::Index i = 0; i < m; ++i) iai[static_cast<std::size_t>(i)] = i;
                            for (Eigen::Index i = p; i < iq_; ++i) {
                                a_[static_cast<std::size_t>(i)] = a_old[static_cast<std::size_t>(i)];
                                u_[i] = u_old[i];
                                iai[static_cast<std::size_t>(a_[static_cast<std::size_t>(i)])] = -1;
                            }
                            x_ = x_old;
                            break; // back to step 2
                        }
                        iai[static_cast<std::size_t>(ip)] = -1;
                        restart = true;
                        break;
                    }
                    // partial step: drop the blocking constraint and retry
                    iai[static_cast<std::size_t>(l)] = l;
                    delete_constraint(l);
                    s[ip] = ci_.col(ip).dot(x_) + ci0_[ip];
                }
            }
        }
    }

    const Vector& x() const noexcept { return x_; }
    Eigen::Index working_size() const noexcept { return iq_; }
    /// Constraint id of working-set slot k: -i-1 for equality i, else inequality column.
    Eigen::Index slot(Eigen::Index k) const { return a_[static_cast<std::size_t>(k)]; }
    double multiplier(Eigen::Index k) const { return u_[k]; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    void compute_d(const Vector& np) { d_.noalias() = J_.transpose() * np; }

    void update_z() { z_.noalias() = J_.rightCols(n_ - iq_) * d_.tail(n_ - iq_); }

    void update_r() {
        for (Eigen::Index i = iq_ - 1; i >= 0; --i) {
            double sum = d_[i];
            for (Eigen::Index j = i + 1; j < iq_; ++j) sum -= R_(i, j) * r_[j];
            r_[i] = sum / R_(i, i);
        }
    }

    bool add_constraint() {
        for (Eigen::Index j = n_ - 1; j >= iq_ + 1; --j) {
            double cc = d_[j - 1], ss = d_[j];
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            d_[j] = 0.0;
            ss /= h;
            cc /= h;
            if (cc < 0.0) {
                cc = -cc;
                ss = -ss;
                d_[j - 1] = -h;
            } else {
                d_[j - 1] = h;
            }
            const double xny = ss / (1.0 + cc);
            for (Eigen::Index k = 0; k < n_; ++k) {
                const double t1 = J_(k, j - 1), t2 = J_(k, j);
                J_(k, j - 1) = t1 * cc + t2 * ss;
                J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
            }
        }
        ++iq_;
        R_.col(iq_ - 1).head(iq_) = d_.head(iq_);
        if (std::abs(d_[iq_ - 1]) <= 1e-12 * r_norm_) return false;
        r_norm_ = std::max(r_norm_, std::abs(d_[iq_ - 1]));
        return true;
    }

    void delete_constraint(Eigen::Index l) {
        const Eigen::Index p = ce_.cols();
        Eigen::Index qq = -1;
        for (Eigen::Index i = p; i < iq_; ++i) {
            if (a_[static_cast<std::size_t>(i)] == l) {
                qq = i;
                break;
            }
        }
        if (qq < 0) throw NumericError("qp: constraint to drop is not in the working set");
        for (Eigen::Index i = qq; i < iq_ - 1; ++i) {
            a_[static_cast<std::size_t>(i)] = a_[static_cast<std::size_t>(i + 1)];
            u_[i] = u_[i + 1];
            R_.col(i) = R_.col(i + 1);
        }
        a_[static_cast<std::size_t>(iq_ - 1)] = a_[static_cast<std::size_t>(iq_)];
        u_[iq_ - 1] = u_[iq_];
        a_[static_cast<std::size_t>(iq_)] = 0;
        u_[iq_] = 0.0;
        R_.col(iq_ - 1).head(iq_).setZero();
        --iq_;
        if (iq_ == 0) return;
        for (Eigen::Index j = qq; j < iq_; ++j) {
            double cc = R_(j, j), ss = R_(j + 1, j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            cc /= h;
            ss /= h;
            R_(j + 1, j) = 0.0;
            if (cc < 0.0) {
                R_(j, j) = -h;
                cc = -cc;
                ss = -ss;
            } else {
                R_(j, j) = h;
            }
            const double xny = ss / (1.0 + cc);
            for (Eigen::Index k = j + 1; k < iq_; ++k) {
                const double t1 = R_(j, k), t2 = R_(j + 1, k);
                R_(j, k) = t1 * cc + t2 * ss;
                R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
            }
            for (Eigen::Index k = 0; k < n_; ++k) {
                const double t1 = J_(k, j), t2 = J_(k, j + 1);
                J_(k, j) = t1 * cc + t2 * ss;
                J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
            }
        }
    }

    Eigen::Index n_;
    const Matrix& ce_;
    const Vector& ce0_;
    const Matrix& ci_;
    const Vector& ci0_;
    QpOptions opt_;
    double two_rho_;
    Matrix J_, R_;
    Vector x_, u_, d_, z_, r_;
    std::vector<Eigen::Index> a_;
    Eigen::Index iq_ = 0;
    double r_norm_ = 1.0;
    std::size_t iterations_ = 0;
};

/// Normal (in "<=" form) and right-hand side of one constraint over the full variable vector.
inline void constraint_row(const QpInstance& inst, ConstraintRef c, Vector& normal, double& rhs) {
    const Eigen::Index n = inst.cost.size();
    normal.setZero(n);
    switch (c.kind) {
    case ConstraintKind::Equality:
        normal = inst.eq.row(c.index).transpose();
        rhs = inst.eq_rhs[c.index];
        break;
    case ConstraintKind::Inequality:
        normal = inst.ineq.row(c.index).transpose();
        rhs = inst.ineq_rhs[c.index];
        break;
    case ConstraintKind::Lower:
        normal[c.index] = -1.0;
        rhs = -inst.lower[c.index];
        break;
    case ConstraintKind::Upper:
        normal[c.index] = 1.0;
        rhs = inst.upper[c.index];
        break;
    }
}

inline KktResiduals kkt_residuals(const QpInstance& inst, const QpSolution& s) {
    KktResiduals r;
    Vector grad = inst.cost + 2.0 * inst.rho * s.x;
    if (inst.eq.rows() > 0) grad += inst.eq.transpose() * s.eq_duals;
    if (inst.ineq.rows() > 0) grad += inst.ineq.transpose() * s.ineq_duals;
    grad += s.upper_duals - s.lower_duals;
    r.stationarity = grad.norm();

    double primal = 0.0, comp = 0.0;
    if (inst.eq.rows() > 0) primal = std::max(primal, (inst.eq * s.x - inst.eq_rhs).cwiseAbs().maxCoeff());
    if (inst.ineq.rows() > 0) {
        const Vector slack = inst.ineq_rhs - inst.ineq * s.x;
        primal = std::max(primal, std::max(0.0, -slack.minCoeff()));
        comp = std::max(comp, slack.cwiseProduct(s.ineq_duals).cwiseAbs().maxCoeff());
    }
    for (Eigen::Index j = 0; j < s.x.size(); ++j) {
        primal = std::max({primal, inst.lower[j] - s.x[j], s.x[j] - inst.upper[j]});
        if (std::isfinite(inst.lower[j])) comp = std::max(comp, std::abs((s.x[j] - inst.lower[j]) * s.lower_duals[j]));
        if (std::isfinite(inst.upper[j])) comp = std::max(comp, std::abs((inst.upper[j] - s.x[j]) * s.upper_duals[j]));
    }
    r.primal = primal;
    r.complementarity = comp;
    return r;
}

} // namespace detail

inline QpSolution solve_qp(const QpInstance& inst, const QpOptions& opt = {}) {
    inst.validate();
    const Eigen::Index n = inst.cost.size();
    const double two_rho = 2.0 * inst.rho;

    // Eliminate fixed variables.
    QpSolution sol;
    Vector x_full = Vector::Zero(n);
    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (inst.lower[j] > inst.upper[j]) throw InfeasibleError("qp: empty bound interval at variable " + std::to_string(j));
        if (inst.lower[j] == inst.upper[j]) {
            x_full[j] = inst.lower[j];
            sol.fixed.push_back(j);
        } else {
            free.push_back(j);
        }
    }
    const auto nr = static_cast<Eigen::Index>(free.size());
    const Matrix eq_r = inst.eq(Eigen::all, free);
    const Vector eq_b = inst.eq_rhs - inst.eq * x_full;
    const Matrix in_r = inst.ineq(Eigen::all, free);
    const Vector in_b = inst.ineq_rhs - inst.ineq * x_full;

    // Keep a maximal independent subset of equality rows; the rest must be implied.
    std::vector<Eigen::Index> eq_kept;
    if (eq_r.rows() > 0) {
        if (nr == 0) {
            if (eq_b.cwiseAbs().maxCoeff() > 1e-9 * (1.0 + inst.eq_rhs.cwiseAbs().maxCoeff())) {
                throw InfeasibleError("qp: fixed variables violate an equality");
            }
        } else {
            Eigen::ColPivHouseholderQR<Matrix> qr(eq_r.transpose());
            qr.setThreshold(1e-10);
            const Eigen::Index rank = qr.rank();
            for (Eigen::Index i = 0; i < rank; ++i) eq_kept.push_back(qr.colsPermutation().indices()[i]);
            std::sort(eq_kept.begin(), eq_kept.end());
            if (rank < eq_r.rows()) {
                // Implied rows must agree with the kept ones.
                const Matrix kept = eq_r(eq_kept, Eigen::all);
                const Eigen::LDLT<Matrix> gram(kept * kept.transpose());
                const Vector kept_b = eq_b(eq_kept);
                for (Eigen::Index i = 0; i < eq_r.rows(); ++i) {
                    if (std::binary_search(eq_kept.begin(), eq_kept.end(), i)) continue;
                    const Vector y = gram.solve(kept * eq_r.row(i).transpose());
                    if (std::abs(eq_b[i] - y.dot(kept_b)) > 1e-7 * (1.0 + std::abs(eq_b[i]))) {
                        throw InfeasibleError("qp: inconsistent equality at row " + std::to_string(i));
                    }
                }
            }
        }
    }

    // Inequalities in ">= 0" form: columns of ci, values ci0.
    std::vector<ConstraintRef> refs;
    for (Eigen::Index i = 0; i < in_r.rows(); ++i) {
        if (in_r.row(i).cwiseAbs().maxCoeff() == 0.0) {
            if (in_b[i] < -1e-9 * (1.0 + std::abs(inst.ineq_rhs[i]))) {
                throw InfeasibleError("qp: fixed variables violate inequality " + std::to_string(i));
            }
            continue;
        }
        refs.push_back({ConstraintKind::Inequality, i});
    }
    for (Eigen::Index r = 0; r < nr; ++r) {
        const Eigen::Index j = free[static_cast<std::size_t>(r)];
        if (std::isfinite(inst.lower[j])) refs.push_back({ConstraintKind::Lower, j});
        if (std::isfinite(inst.upper[j])) refs.push_back({ConstraintKind::Upper, j});
    }
    std::vector<Eigen::Index> position(static_cast<std::size_t>(n), -1);
    for (Eigen::Index r = 0; r < nr; ++r) position[static_cast<std::size_t>(free[static_cast<std::size_t>(r)])] = r;

    const auto mi = static_cast<Eigen::Index>(refs.size());
    Matrix ci = Matrix::Zero(nr, mi);
    Vector ci0(mi);
    for (Eigen::Index c = 0; c < mi; ++c) {
        const ConstraintRef ref = refs[static_cast<std::size_t>(c)];
        switch (ref.kind) {
        case ConstraintKind::Inequality:
            ci.col(c) = -in_r.row(ref.index).transpose();
            ci0[c] = in_b[ref.index];
            break;
        case ConstraintKind::Lower:
            ci(position[static_cast<std::size_t>(ref.index)], c) = 1.0;
            ci0[c] = -inst.lower[ref.index];
            break;
        case ConstraintKind::Upper:
            ci(position[static_cast<std::size_t>(ref.index)], c) = -1.0;
            ci0[c] = inst.upper[ref.index];
            break;
        case ConstraintKind::Equality: break;
        }
    }
    const Matrix ce = eq_r(eq_kept, Eigen::all).transpose();
    const Vector ce0 = -eq_b(eq_kept);
    const Vector g0 = inst.cost(free) + two_rho * x_full(free); // zero for the free part of x_full

    const Vector x_fixed = x_full;
    std::vector<ConstraintRef> working;
    Vector lambda;
    if (nr > 0) {
        detail::GoldfarbIdnani gi(two_rho, g0, ce, ce0, ci, ci0, opt);
        gi.solve();
        sol.iterations = gi.iterations();
        x_full(free) = gi.x();
        lambda.resize(gi.working_size());
        for (Eigen::Index k = 0; k < gi.working_size(); ++k) {
            const Eigen::Index id = gi.slot(k);
            if (id < 0) {
                working.push_back({ConstraintKind::Equality, eq_kept[static_cast<std::size_t>(-id - 1)]});
                lambda[k] = -gi.multiplier(k);
            } else {
                working.push_back(refs[static_cast<std::size_t>(id)]);
                lambda[k] = std::max(0.0, gi.multiplier(k));
            }
        }
    }

    // Polish: resolve x and the multipliers exactly from the working set.
    if (opt.polish && !working.empty()) {
        const auto w = static_cast<Eigen::Index>(working.size());
        Matrix a(w, nr);
        Vector b(w), normal;
        double rhs = 0.0;
        for (Eigen::Index k = 0; k < w; ++k) {
            detail::constraint_row(inst, working[static_cast<std::size_t>(k)], normal, rhs);
            a.row(k) = normal(free).transpose();
            b[k] = rhs - normal.dot(x_fixed);
        }
        const Eigen::LDLT<Matrix> m(a * a.transpose());
        if (m.info() == Eigen::Success) {
            const Vector lam = m.solve(-two_rho * b - a * g0);
            const Vector xr = -(g0 + a.transpose() * lam) / two_rho;
            bool ok = lam.allFinite() && xr.allFinite();
            for (Eigen::Index k = 0; ok && k < w; ++k) {
                if (working[static_cast<std::size_t>(k)].kind != ConstraintKind::Equality && lam[k] < -1e-9) ok = false;
            }
            if (ok) {
                Vector trial = x_full;
                trial(free) = xr;
                const double before = (inst.ineq.rows() > 0 ? std::max(0.0, (inst.ineq * x_full - inst.ineq_rhs).maxCoeff()) : 0.0);
                const double after = (inst.ineq.rows() > 0 ? std::max(0.0, (inst.ineq * trial - inst.ineq_rhs).maxCoeff()) : 0.0);
                double bound_after = 0.0;
                for (Eigen::Index r = 0; r < nr; ++r) {
                    const Eigen::Index j = free[static_cast<std::size_t>(r)];
                    bound_after = std::max({bound_after, inst.lower[j] - trial[j], trial[j] - inst.upper[j]});
                }
                if (std::max(after, bound_after) <= std::max(before, 1e-9)) {
                    x_full = trial;
                    for (Eigen::Index k = 0; k < w; ++k) {
                        lambda[k] = working[static_cast<std::size_t>(k)].kind == ConstraintKind::Equality ? lam[k] : std::max(0.0, lam[k]);
                    }
                }
            }
        }
    }

    sol.x = x_full;
    sol.eq_duals = Vector::Zero(inst.eq.rows());
    sol.ineq_duals = Vector::Zero(inst.ineq.rows());
    sol.lower_duals = Vector::Zero(n);
    sol.upper_duals = Vector::Zero(n);
    for (std::size_t k = 0; k < working.size(); ++k) {
        const ConstraintRef c = working[k];
        const double l = lambda[static_cast<Eigen::Index>(k)];
        switch (c.kind) {
        case ConstraintKind::Equality: sol.eq_duals[c.index] = l; break;
        case ConstraintKind::Inequality: sol.ineq_duals[c.index] = l; break;
        case ConstraintKind::Lower: sol.lower_duals[c.index] = l; break;
        case ConstraintKind::Upper: sol.upper_duals[c.index] = l; break;
        }
    }
    // Fixed variables absorb the remaining stationarity on their lower-bound multiplier.
    if (!sol.fixed.empty()) {
        Vector grad = inst.cost + two_rho * sol.x;
        if (inst.eq.rows() > 0) grad += inst.eq.transpose() * sol.eq_duals;
        if (inst.ineq.rows() > 0) grad += inst.ineq.transpose() * sol.ineq_duals;
        for (Eigen::Index j : sol.fixed) sol.lower_duals[j] = grad[j];
    }
    sol.active = std::move(working);
    sol.objective = inst.objective(sol.x);
    sol.residuals = detail::kkt_residuals(inst, sol);
    return sol;
}

/// Gradients of a downstream loss with respect to the QP data.
struct QpGradient {
    Vector cost;     // d/d xi
    Vector eq_rhs;   // d/d b
    Vector ineq_rhs; // d/d a
    Vector lower;    // d/d lower (includes fixed variables)
    Vector upper;    // d/d upper
};

/// Implicit differentiation through the KKT system restricted to equalities, fixed variables, and
/// inequalities whose multiplier exceeds `dual_threshold`. `upstream` is dLoss/dx*.
inline QpGradient qp_backward(const QpSolution& sol, const QpInstance& inst, const Vector& upstream,
                              double dual_threshold = 1e-8) {
    const Eigen::Index n = inst.cost.size();
    if (upstream.size() != n || sol.x.size() != n) throw DimensionError("qp_backward: gradient length mismatch");
    const double two_rho = 2.0 * inst.rho;

    std::vector<ConstraintRef> rows;
    for (const ConstraintRef& c : sol.active) {
        double l = 0.0;
        switch (c.kind) {
        case ConstraintKind::Equality: rows.push_back(c); continue;
        case ConstraintKind::Inequality: l = sol.ineq_duals[c.index]; break;
        case ConstraintKind::Lower: l = sol.lower_duals[c.index]; break;
        case ConstraintKind::Upper: l = sol.upper_duals[c.index]; break;
        }
        if (l > dual_threshold) rows.push_back(c);
    }
    for (Eigen::Index j : sol.fixed) rows.push_back({ConstraintKind::Lower, j});

    QpGradient out{Vector::Zero(n), Vector::Zero(inst.eq.rows()), Vector::Zero(inst.ineq.rows()), Vector::Zero(n),
                   Vector::Zero(n)};
    if (rows.empty()) {
        out.cost = -upstream / two_rho;
        return out;
    }
    const auto w = static_cast<Eigen::Index>(rows.size());
    Matrix a(w, n);
    Vector normal;
    double rhs = 0.0;
    for (Eigen::Index k = 0; k < w; ++k) {
        detail::constraint_row(inst, rows[static_cast<std::size_t>(k)], normal, rhs);
        a.row(k) = normal.transpose();
    }
    const Eigen::LLT<Matrix> m(a * a.transpose());
    if (m.info() != Eigen::Success || m.rcond() < 1e-12) {
        throw DegenerateKkt("qp_backward: active constraint normals are linearly dependent; perturb the cost "
                            "vector slightly or raise the dual threshold");
    }
    const Vector mu = m.solve(a * upstream); // dLoss/d(active rhs)
    out.cost = -(upstream - a.transpose() * mu) / two_rho;
    for (Eigen::Index k = 0; k < w; ++k) {
        const ConstraintRef c = rows[static_cast<std::size_t>(k)];
        switch (c.kind) {
        case ConstraintKind::Equality: out.eq_rhs[c.index] += mu[k]; break;
        case ConstraintKind::Inequality: out.ineq_rhs[c.index] += mu[k]; break;
        case ConstraintKind::Lower: out.lower[c.index] -= mu[k]; break;
        case ConstraintKind::Upper: out.upper[c.index] += mu[k]; break;
        }
    }
    return out;
}

} // namespace gdf::solvers
