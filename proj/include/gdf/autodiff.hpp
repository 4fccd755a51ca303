#pragma once

// Reverse-mode automatic differentiation over dense row-major arrays.
//
// A Tape records a straight-line program of primitive array operations.
// Every node owns its forward value; backward() sweeps the tape in reverse
// and accumulates adjoints into the leaves. All arithmetic is double.

#include "gdf/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gdf::ad {

class Tensor {
public:
    using Shape = std::vector<std::size_t>;

    Tensor() : shape_{}, data_(1, 0.0) {}

    Tensor(Shape shape, std::vector<double> data, bool checked = true)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (extent(shape_) != data_.size()) {
            throw DimensionError("tensor: shape holds " + std::to_string(extent(shape_)) +
                                 " elements but " + std::to_string(data_.size()) + " were given");
        }
        if (checked) {
            for (double v : data_) {
                if (!std::isfinite(v)) throw NumericError("tensor: non-finite value");
            }
        }
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }
    static Tensor zeros(Shape shape) {
        const std::size_t n = extent(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }
    static Tensor filled(Shape shape, double v) {
        const std::size_t n = extent(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }
    /// Column vector of shape {n, 1}.
    static Tensor column(std::vector<double> v) {
        const std::size_t n = v.size();
        return Tensor({n, 1}, std::move(v));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        return Tensor({rows, cols}, std::move(v));
    }

    static std::size_t extent(const Shape& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> mutable_data() noexcept { return data_; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t rows() const { return require_matrix(), shape_[0]; }
    std::size_t cols() const { return require_matrix(), shape_[1]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double item() const {
        if (data_.size() != 1) throw ContractError("tensor: item() on non-scalar tensor");
        return data_[0];
    }

    bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

    std::string shape_string() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
        os << ']';
        return os.str();
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void require_matrix() const {
        if (shape_.size() != 2) throw DimensionError("tensor: expected rank-2, got " + shape_string());
    }

    Shape shape_;
    std::vector<double> data_;
};

struct NodeId {
    std::uint32_t index = 0;
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Subtract,
    Multiply,     // elementwise
    MatMul,
    Relu,
    Sigmoid,
    Hinge,        // max(x, 0)
    Square,
    Sum,
    Scale,        // scalar * x
    Minimum,      // elementwise min(a, b); ties send the gradient to a
};

inline const char* op_name(Op op) {
    switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Subtract: return "subtract";
    case Op::Multiply: return "multiply";
    case Op::MatMul: return "matmul";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Hinge: return "hinge";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Scale: return "scale";
    case Op::Minimum: return "minimum";
    }
    return "?";
}

inline double sigmoid(double x) {
    // Split by sign so exp() never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Leaf id -> gradient of the differentiated output.
using Gradients = std::map<NodeId, Tensor>;

class Tape {
public:
    explicit Tape(bool checked = true) : checked_(checked) {}

    NodeId leaf(Tensor value) {
        nodes_.push_back(Node{Op::Leaf, {}, 0.0, std::move(value)});
        return id_of_last();
    }

    NodeId record(Op op, std::span<const NodeId> inputs, double scalar = 1.0) {
        const std::size_t arity = arity_of(op);
        if (op == Op::Leaf) throw ContractError("tape: leaves are created with leaf()");
        if (inputs.size() != arity) {
            throw ContractError(std::string("tape: ") + op_name(op) + " takes " + std::to_string(arity) +
                                " input(s)");
        }
        Node n{op, {}, scalar, {}};
        for (std::size_t i = 0; i < arity; ++i) {
            if (inputs[i].index >= nodes_.size()) throw ContractError("tape: unknown input node");
            n.inputs[i] = inputs[i];
        }
        n.value = evaluate(n);
        nodes_.push_back(std::move(n));
        return id_of_last();
    }

    const Tensor& value(NodeId id) const { return nodes_.at(id.index).value; }
    Op op(NodeId id) const { return nodes_.at(id.index).op; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool checked() const noexcept { return checked_; }

    /// Replace a leaf value; call replay() to propagate.
    void set_leaf(NodeId id, Tensor value) {
        Node& n = nodes_.at(id.index);
        if (n.op != Op::Leaf) throw ContractError("tape: set_leaf on non-leaf node");
        if (!n.value.same_shape(value)) throw DimensionError("tape: set_leaf changes the leaf shape");
        n.value = std::move(value);
    }

    /// Recompute every non-leaf value in recording order.
    void replay() {
        for (auto& n : nodes_) {
            if (n.op != Op::Leaf) n.value = evaluate(n);
        }
    }

    /// Reverse sweep from a scalar-shaped output. Returns d(output)/d(leaf) for every leaf
    /// recorded before `output`.
    Gradients backward(NodeId output) const {
        if (output.index >= nodes_.size()) throw ContractError("backward: unknown output node");
        if (nodes_[output.index].value.size() != 1) {
            throw ContractError("backward: output must be scalar-shaped, got " +
                                nodes_[output.index].value.shape_string());
        }
        std::vector<std::vector<double>> adj(output.index + 1);
        adj[output.index] = {1.0};
        for (std::size_t i = output.index + 1; i-- > 0;) {
            if (adj[i].empty()) continue;
            const Node& n = nodes_[i];
            if (n.op == Op::Leaf) continue;
            propagate(n, adj[i], adj);
        }
        Gradients grads;
        for (std::uint32_t i = 0; i <= output.index; ++i) {
            if (nodes_[i].op != Op::Leaf) continue;
            const Tensor& v = nodes_[i].value;
            if (adj[i].empty()) {
                grads.emplace(NodeId{i}, Tensor::zeros(v.shape()));
            } else {
                grads.emplace(NodeId{i}, Tensor(v.shape(), std::move(adj[i]), false));
            }
        }
        return grads;
    }

private:
    struct Node {
        Op op;
        std::array<NodeId, 2> inputs;
        double scalar;
        Tensor value;
    };

    static std::size_t arity_of(Op op) {
        switch (op) {
        case Op::Leaf: return 0;
        case Op::Add:
        case Op::Subtract:
        case Op::Multiply:
        case Op::MatMul:
        case Op::Minimum: return 2;
        default: return 1;
        }
    }

    NodeId id_of_last() const { return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)}; }

    Tensor evaluate(const Node& n) const {
        const Tensor& a = nodes_[n.inputs[0].index].value;
        switch (n.op) {
        case Op::Add:
        case Op::Subtract:
        case Op::Multiply:
        case Op::Minimum: {
            const Tensor& b = nodes_[n.inputs[1].index].value;
            if (!a.same_shape(b)) {
                throw DimensionError(std::string(op_name(n.op)) + ": shape mismatch " + a.shape_string() +
                                     " vs " + b.shape_string());
            }
            std::vector<double> out(a.size());
            auto x = a.data();
            auto y = b.data();
            for (std::size_t i = 0; i < out.size(); ++i) {
                switch (n.op) {
                case Op::Add: out[i] = x[i] + y[i]; break;
                case Op::Subtract: out[i] = x[i] - y[i]; break;
                case Op::Multiply: out[i] = x[i] * y[i]; break;
                default: out[i] = x[i] <= y[i] ? x[i] : y[i]; break;
                }
            }
            return Tensor(a.shape(), std::move(out), checked_);
        }
        case Op::MatMul: {
            const Tensor& b = nodes_[n.inputs[1].index].value;
            if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
                throw DimensionError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
            }
            const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
            std::vector<double> out(m * p, 0.0);
            auto x = a.data();
            auto y = b.data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t l = 0; l < k; ++l) {
                    const double xil = x[i * k + l];
                    for (std::size_t j = 0; j < p; ++j) out[i * p + j] += xil * y[l * p + j];
                }
            }
            return Tensor({m, p}, std::move(out), checked_);
        }
        case Op::Relu:
        case Op::Hinge:
        case Op::Sigmoid:
        case Op::Square:
        case Op::Scale: {
            std::vector<double> out(a.size());
            auto x = a.data();
            for (std::size_t i = 0; i < out.size(); ++i) {
                switch (n.op) {
                case Op::Relu:
                case Op::Hinge: out[i] = x[i] > 0.0 ? x[i] : 0.0; break;
                case Op::Sigmoid: out[i] = sigmoid(x[i]); break;
                case Op::Square: out[i] = x[i] * x[i]; break;
                default: out[i] = n.scalar * x[i]; break;
                }
            }
            return Tensor(a.shape(), std::move(out), checked_);
        }
        case Op::Sum: {
            double s = 0.0;
            for (double v : a.data()) s += v;
            return Tensor({}, {s}, checked_);
        }
        case Op::Leaf: break;
        }
        throw ContractError("tape: cannot evaluate leaf");
    }

    static void accumulate(std::vector<double>& into, std::size_t n, auto&& fill) {
        if (into.empty()) into.assign(n, 0.0);
        fill(into);
    }

    void propagate(const Node& n, const std::vector<double>& g, std::vector<std::vector<double>>& adj) const {
        const std::uint32_t ia = n.inputs[0].index;
        const Tensor& a = nodes_[ia].value;
        switch (n.op) {
        case Op::Add:
        case Op::Subtract: {
            const std::uint32_t ib = n.inputs[1].index;
            const double sign = n.op == Op::Add ? 1.0 : -1.0;
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
            });
            accumulate(adj[ib], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += sign * g[i];
            });
            break;
        }
        case Op::Multiply: {
            const std::uint32_t ib = n.inputs[1].index;
            const Tensor& b = nodes_[ib].value;
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * b[i];
            });
            accumulate(adj[ib], b.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * a[i];
            });
            break;
        }
        case Op::Minimum: {
            const std::uint32_t ib = n.inputs[1].index;
            const Tensor& b = nodes_[ib].value;
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += a[i] <= b[i] ? g[i] : 0.0;
            });
            accumulate(adj[ib], b.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += a[i] <= b[i] ? 0.0 : g[i];
            });
            break;
        }
        case Op::MatMul: {
            const std::uint32_t ib = n.inputs[1].index;
            const Tensor& b = nodes_[ib].value;
            const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
            auto x = a.data();
            auto y = b.data();
            // dA = G * B^T, dB = A^T * G
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t l = 0; l < k; ++l) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < p; ++j) s += g[i * p + j] * y[l * p + j];
                        d[i * k + l] += s;
                    }
            });
            accumulate(adj[ib], b.size(), [&](auto& d) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t l = 0; l < k; ++l) {
                        const double xil = x[i * k + l];
                        for (std::size_t j = 0; j < p; ++j) d[l * p + j] += xil * g[i * p + j];
                    }
            });
            break;
        }
        case Op::Relu:
        case Op::Hinge:
            // Subgradient at 0 is 0.
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += a[i] > 0.0 ? g[i] : 0.0;
            });
            break;
        case Op::Sigmoid:
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double s = n.value[i];
                    d[i] += g[i] * s * (1.0 - s);
                }
            });
            break;
        case Op::Square:
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += 2.0 * a[i] * g[i];
            });
            break;
        case Op::Scale:
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < g.size(); ++i) d[i] += n.scalar * g[i];
            });
            break;
        case Op::Sum:
            accumulate(adj[ia], a.size(), [&](auto& d) {
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
            });
            break;
        case Op::Leaf: break;
        }
    }

    bool checked_;
    std::vector<Node> nodes_;
};

// Free-function front end so call sites read as expressions.
inline NodeId add(Tape& t, NodeId a, NodeId b) { return t.record(Op::Add, std::array{a, b}); }
inline NodeId subtract(Tape& t, NodeId a, NodeId b) { return t.record(Op::Subtract, std::array{a, b}); }
inline NodeId multiply(Tape& t, NodeId a, NodeId b) { return t.record(Op::Multiply, std::array{a, b}); }
inline NodeId matmul(Tape& t, NodeId a, NodeId b) { return t.record(Op::MatMul, std::array{a, b}); }
inline NodeId relu(Tape& t, NodeId a) { return t.record(Op::Relu, std::array{a}); }
inline NodeId sigmoid(Tape& t, NodeId a) { return t.record(Op::Sigmoid, std::array{a}); }
inline NodeId hinge(Tape& t, NodeId a) { return t.record(Op::Hinge, std::array{a}); }
inline NodeId square(Tape& t, NodeId a) { return t.record(Op::Square, std::array{a}); }
inline NodeId sum(Tape& t, NodeId a) { return t.record(Op::Sum, std::array{a}); }
inline NodeId scale(Tape& t, NodeId a, double s) { return t.record(Op::Scale, std::array{a}, s); }

inline NodeId minimum(Tape& t, NodeId a, NodeId b) { return t.record(Op::Minimum, std::array{a, b}); }

/// Builds a scalar function of one tensor argument on a fresh tape.
using ScalarFunction = std::function<NodeId(Tape&, NodeId)>;

/// Max over components of |analytic - numeric| / max(1, |analytic|, |numeric|),
/// numeric being central differences with the given step.
inline double check_gradient(const ScalarFunction& f, const Tensor& point, double step) {
    if (!(step > 0.0)) throw ContractError("check_gradient: step must be positive");
    Tape tape;
    const NodeId x = tape.leaf(point);
    const NodeId y = f(tape, x);
    const Tensor analytic = tape.backward(y).at(x);

    double worst = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
        Tensor plus = point, minus = point;
        plus.mutable_data()[i] += step;
        minus.mutable_data()[i] -= step;
        tape.set_leaf(x, plus);
        tape.replay();
        const double fp = tape.value(y).item();
        tape.set_leaf(x, minus);
        tape.replay();
        const double fm = tape.value(y).item();
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i];
        const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace gdf::ad
