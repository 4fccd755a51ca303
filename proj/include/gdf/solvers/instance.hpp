#pragma once

#include "gdf/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace gdf::solvers {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min c'x + offset  s.t.  H x <= a,  E x = b,  lower <= x <= upper,  x_j integer where mask[j].
struct MilpInstance {
    Vector cost;
    Matrix ineq;
    Vector ineq_rhs;
    Matrix eq;
    Vector eq_rhs;
    Vector lower;
    Vector upper;
    std::vector<bool> integer;
    double offset = 0.0;

    std::size_t variables() const noexcept { return static_cast<std::size_t>(cost.size()); }
    std::size_t inequalities() const noexcept { return static_cast<std::size_t>(ineq.rows()); }
    std::size_t equalities() const noexcept { return static_cast<std::size_t>(eq.rows()); }

    /// Empty instance over n continuous variables in [0, +inf).
    static MilpInstance with_variables(std::size_t n) {
        MilpInstance m;
        const auto nn = static_cast<Eigen::Index>(n);
        m.cost = Vector::Zero(nn);
        m.ineq = Matrix::Zero(0, nn);
        m.ineq_rhs = Vector::Zero(0);
        m.eq = Matrix::Zero(0, nn);
        m.eq_rhs = Vector::Zero(0);
        m.lower = Vector::Zero(nn);
        m.upper = Vector::Constant(nn, kInf);
        m.integer.assign(n, false);
        return m;
    }

    double objective(const Vector& x) const { return cost.dot(x) + offset; }

    void validate() const {
        const Eigen::Index n = cost.size();
        auto fail = [](const std::string& what) { throw DimensionError("milp instance: " + what); };
        if (ineq.cols() != n && ineq.rows() > 0) fail("inequality matrix has wrong column count");
        if (eq.cols() != n && eq.rows() > 0) fail("equality matrix has wrong column count");
        if (ineq_rhs.size() != ineq.rows()) fail("inequality rhs length differs from row count");
        if (eq_rhs.size() != eq.rows()) fail("equality rhs length differs from row count");
        if (lower.size() != n || upper.size() != n) fail("bound vectors have wrong length");
        if (integer.size() != static_cast<std::size_t>(n)) fail("integrality mask length differs from variable count");
        auto finite = [](const auto& m) { return m.allFinite(); };
        if (!finite(cost) || !finite(ineq) || !finite(ineq_rhs) || !finite(eq) || !finite(eq_rhs)) {
            throw ContractError("milp instance: non-finite coefficient");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::isnan(lower[j]) || std::isnan(upper[j])) throw ContractError("milp instance: NaN bound");
        }
    }

    /// Largest violation of the linear constraints and bounds at x.
    double max_violation(const Vector& x) const {
        double v = 0.0;
        if (ineq.rows() > 0) v = std::max(v, (ineq * x - ineq_rhs).maxCoeff());
        if (eq.rows() > 0) v = std::max(v, (eq * x - eq_rhs).cwiseAbs().maxCoeff());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            v = std::max(v, lower[j] - x[j]);
            v = std::max(v, x[j] - upper[j]);
        }
        return std::max(v, 0.0);
    }
};

/// min xi'x + rho |x|^2  s.t.  H x <= a,  E x = b,  lower <= x <= upper.
struct QpInstance {
    Vector cost; // xi
    double rho = 0.1;
    Matrix ineq;
    Vector ineq_rhs;
    Matrix eq;
    Vector eq_rhs;
    Vector lower;
    Vector upper;

    std::size_t variables() const noexcept { return static_cast<std::size_t>(cost.size()); }

    /// Drops integrality and adds the quadratic term.
    static QpInstance relax(const MilpInstance& m, double rho) {
        return QpInstance{m.cost, rho, m.ineq, m.ineq_rhs, m.eq, m.eq_rhs, m.lower, m.upper};
    }

    double objective(const Vector& x) const { return cost.dot(x) + rho * x.squaredNorm(); }

    void validate() const {
        if (!(rho > 0.0)) throw ContractError("qp instance: rho must be positive");
        MilpInstance as_lp{cost, ineq, ineq_rhs, eq, eq_rhs, lower, upper,
                           std::vector<bool>(variables(), false), 0.0};
        as_lp.validate();
    }
};

} // namespace gdf::solvers
