#pragma once

// Tape-based reverse-mode differentiation over a fixed operation vocabulary.
//
// A Graph owns every node created while evaluating one forward pass. Nodes are
// appended in evaluation order, so the tape is already topologically sorted and
// backward is a single reverse sweep. Vars are non-owning handles into a Graph
// and must not outlive it.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bassl/tensor.hpp"

namespace bassl {

/// A named learnable tensor. Models own their Parameters; a Graph only refers
/// to them while a forward/backward pass is in flight.
struct Parameter {
    std::string name;
    Tensor value;
};

/// Adjoints of every parameter reachable from a backward root, in the order
/// the parameters were first bound into the graph.
class Gradients {
public:
    using Entry = std::pair<const Parameter*, Tensor>;

    bool contains(const Parameter& p) const noexcept;
    const Tensor& at(const Parameter& p) const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::vector<std::string> names() const;

    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    void add(const Parameter* p, Tensor grad);

private:
    std::vector<Entry> entries_;
};

class Graph;

namespace detail {
struct Node;
}

/// Handle to a value computed inside a Graph.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const noexcept;
    Graph& graph() const;
    bool valid() const noexcept { return node_ != nullptr; }

private:
    friend class Graph;
    Var(Graph* g, detail::Node* n) : graph_(g), node_(n) {}

    Graph* graph_ = nullptr;
    detail::Node* node_ = nullptr;
};

// Receives the adjoint of the op's output and one pointer per parent, already
// zero-initialised to the parent's shape; null when that parent needs no
// gradient. Implementations accumulate (+=) into the non-null targets.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

class Graph {
public:
    Graph();
    ~Graph();
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    // Binding the same Parameter twice yields the same leaf.
    Var parameter(Parameter& p);

    // Appends an op result. Throws NumericError if `value` is not finite.
    Var record(std::string_view op, Tensor value, std::vector<Var> parents, BackwardFn backward);

    // Runs reverse accumulation from a scalar root. A graph can be
    // differentiated once; a second call throws StateError.
    Gradients backward(const Var& root);

    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    Var make_leaf(Tensor value, Parameter* param);

    std::vector<std::unique_ptr<detail::Node>> nodes_;
    bool differentiated_ = false;
};

// ---- operation vocabulary -------------------------------------------------
// All binary elementwise ops require identical shapes (no broadcasting).

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a * s + shift with constant scalars; used for fixed standardisation.
Var affine(const Var& a, double s, double shift);

// (M,K) x (K,N) -> (M,N)
Var matmul(const Var& a, const Var& b);
// (M,N) -> (N,M)
Var transpose(const Var& a);
// (N,D) + bias (D) added to every row.
Var add_row_bias(const Var& x, const Var& bias);

// Elementwise max(0, x); the subgradient at 0 is 0.
Var relu(const Var& x);

Var reshape(const Var& x, Shape shape);
// out.shape[i] = x.shape[axes[i]].
Var permute(const Var& x, const std::vector<std::size_t>& axes);
Var concat(const std::vector<Var>& parts, std::size_t axis);
// out[i] = x[index[i]] (flat indices); adjoint is a scatter-add.
Var gather(const Var& x, Shape out_shape, std::shared_ptr<const std::vector<std::size_t>> index);

Var sum(const Var& x);
Var mean(const Var& x);

// Each row divided by max(||row||_2, eps).
inline constexpr double kNormalizeEps = 1e-12;
Var l2_normalize_rows(const Var& x, double eps = kNormalizeEps);

// Mean over rows of -log softmax(logits)[label]. Throws IndexError on a bad label.
Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> labels);

// Same value, zero adjoint to everything upstream.
Var stop_gradient(const Var& x);

}  // namespace bassl
