#pragma once

// Best-first branch-and-bound over LP relaxations.

#include "gdf/errors.hpp"
#include "gdf/solvers/instance.hpp"
#include "gdf/solvers/simplex.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace gdf::solvers {

enum class MilpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(MilpStatus s) {
    switch (s) {
    case MilpStatus::Optimal: return "optimal";
    case MilpStatus::Infeasible: return "infeasible";
    case MilpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

struct MilpOptions {
    LpOptions lp;
    double integrality_tol = 1e-6;
    double absolute_gap = 1e-6;
    std::size_t node_budget = 100000;
};

struct MilpResult {
    MilpStatus status = MilpStatus::Infeasible;
    Vector x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double root_bound = std::numeric_limits<double>::quiet_NaN();
    std::size_t nodes = 0;
};

/// Raised when the node budget runs out; carries the best integer solution found so far.
class NodeBudgetExceeded : public Error {
public:
    NodeBudgetExceeded(std::size_t budget, std::optional<MilpResult> incumbent)
        : Error("branch-and-bound: node budget of " + std::to_string(budget) + " exhausted" +
                (incumbent ? " (incumbent available)" : " (no incumbent)")),
          incumbent_(std::move(incumbent)) {}
    const std::optional<MilpResult>& incumbent() const noexcept { return incumbent_; }

private:
    std::optional<MilpResult> incumbent_;
};

namespace detail {

struct BranchNode {
    double bound;
    std::size_t id;
    Vector lower;
    Vector upper;
    Vector x;
};

struct WorseNode {
    bool operator()(const BranchNode& a, const BranchNode& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

/// Integer variable whose fractional part is closest to 1/2; lowest index on ties. -1 if integral.
inline Eigen::Index most_fractional(const Vector& x, const std::vector<bool>& integer, double tol) {
    Eigen::Index best = -1;
    double best_score = -1.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (!integer[static_cast<std::size_t>(j)]) continue;
        const double frac = x[j] - std::floor(x[j]);
        if (frac <= tol || frac >= 1.0 - tol) continue;
        const double score = 0.5 - std::abs(frac - 0.5);
        if (score > best_score + 1e-12) {
            best_score = score;
            best = j;
        }
    }
    return best;
}

} // namespace detail

inline MilpResult solve_milp(const MilpInstance& inst, const MilpOptions& opt = {}) {
    inst.validate();
    MilpResult result;
    std::size_t next_id = 0;

    auto relax = [&](Vector lower, Vector upper) -> std::optional<detail::BranchNode> {
        LpResult lp = solve_lp(inst, lower, upper, opt.lp);
        if (lp.status == LpStatus::Unbounded) {
            throw ContractError("branch-and-bound: LP relaxation is unbounded");
        }
        if (lp.status != LpStatus::Optimal) return std::nullopt;
        return detail::BranchNode{lp.objective, next_id++, std::move(lower), std::move(upper), std::move(lp.x)};
    };

    std::optional<detail::BranchNode> root;
    try {
        root = relax(inst.lower, inst.upper);
    } catch (const ContractError&) {
        result.status = MilpStatus::Unbounded;
        return result;
    }
    result.nodes = 1;
    if (!root) return result;
    result.root_bound = root->bound;

    std::priority_queue<detail::BranchNode, std::vector<detail::BranchNode>, detail::WorseNode> open;
    open.push(std::move(*root));

    std::optional<MilpResult> incumbent;
    auto cutoff = [&](double bound) { return incumbent && bound >= incumbent->objective - opt.absolute_gap; };

    while (!open.empty()) {
        detail::BranchNode node = open.top();
        open.pop();
        if (cutoff(node.bound)) break; // best-first: every remaining node is at least as bad

        const Eigen::Index j = detail::most_fractional(node.x, inst.integer, opt.integrality_tol);
        if (j < 0) {
            Vector x = node.x;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                if (inst.integer[static_cast<std::size_t>(i)]) x[i] = std::round(x[i]);
            }
            const double value = inst.objective(x);
            if (!incumbent || value < incumbent->objective) {
                incumbent = MilpResult{MilpStatus::Optimal, std::move(x), value, result.root_bound, result.nodes};
            }
            continue;
        }

        if (result.nodes + 2 > opt.node_budget) {
            if (incumbent) incumbent->nodes = result.nodes;
            throw NodeBudgetExceeded(opt.node_budget, incumbent);
        }
        const double v = node.x[j];
        Vector down_upper = node.upper;
        down_upper[j] = std::floor(v);
        Vector up_lower = node.lower;
        up_lower[j] = std::ceil(v);
        for (auto child : {relax(node.lower, std::move(down_upper)), relax(std::move(up_lower), node.upper)}) {
            ++result.nodes;
            if (child && !cutoff(child->bound)) open.push(std::move(*child));
        }
    }

    if (!incumbent) return result;
    incumbent->nodes = result.nodes;
    incumbent->root_bound = result.root_bound;
    return *incumbent;
}

} // namespace gdf::solvers
