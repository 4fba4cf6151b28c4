#include "bassl/autodiff.hpp"

#include "bassl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace bassl {

namespace detail {

struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    std::vector<Node*> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
};

}  // namespace detail

using detail::Node;

// ---- Gradients -------------------------------------------------------------

bool Gradients::contains(const Parameter& p) const noexcept {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.first == &p; });
}

const Tensor& Gradients::at(const Parameter& p) const {
    for (const auto& e : entries_) {
        if (e.first == &p) {
            return e.second;
        }
    }
    throw IndexError("no gradient recorded for parameter '" + p.name + "'");
}

std::vector<std::string> Gradients::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        out.push_back(e.first->name);
    }
    return out;
}

void Gradients::add(const Parameter* p, Tensor grad) {
    entries_.emplace_back(p, std::move(grad));
}

// ---- Var / Graph -----------------------------------------------------------

const Tensor& Var::value() const {
    if (node_ == nullptr) {
        throw StateError("use of an unbound Var");
    }
    return node_->value;
}

bool Var::requires_grad() const noexcept {
    return node_ != nullptr && node_->requires_grad;
}

Graph& Var::graph() const {
    if (graph_ == nullptr) {
        throw StateError("use of an unbound Var");
    }
    return *graph_;
}

Graph::Graph() = default;
Graph::~Graph() = default;

Var Graph::make_leaf(Tensor value, Parameter* param) {
    auto node = std::make_unique<Node>();
    node->value = std::move(value);
    node->param = param;
    node->requires_grad = param != nullptr;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.back().get());
}

Var Graph::constant(Tensor value) {
    return make_leaf(std::move(value), nullptr);
}

Var Graph::parameter(Parameter& p) {
    for (const auto& n : nodes_) {
        if (n->param == &p) {
            return Var(this, n.get());
        }
    }
    return make_leaf(p.value, &p);
}

Var Graph::record(std::string_view op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
    if (!value.all_finite()) {
        throw NumericError("non-finite value produced by " + std::string(op));
    }
    auto node = std::make_unique<Node>();
    node->value = std::move(value);
    for (const Var& p : parents) {
        if (p.graph_ != this) {
            throw ContractError(std::string(op) + ": operand belongs to a different graph");
        }
        node->requires_grad = node->requires_grad || p.node_->requires_grad;
        node->parents.push_back(p.node_);
    }
    if (node->requires_grad) {
        node->backward = std::move(backward);
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.back().get());
}

Gradients Graph::backward(const Var& root) {
    if (differentiated_) {
        throw StateError("backward already called on this graph");
    }
    if (root.graph_ != this) {
        throw ContractError("backward root belongs to a different graph");
    }
    if (root.node_->value.size() != 1) {
        throw ContractError("backward root must be scalar, got shape " +
                            shape_string(root.node_->value.shape()));
    }
    differentiated_ = true;

    root.node_->grad = Tensor(root.node_->value.shape(), 1.0);
    std::vector<Tensor*> targets;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (!n.grad || !n.backward) {
            continue;
        }
        targets.assign(n.parents.size(), nullptr);
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
            Node* p = n.parents[i];
            if (!p->requires_grad) {
                continue;
            }
            if (!p->grad) {
                p->grad = Tensor(p->value.shape(), 0.0);
            }
            targets[i] = &*p->grad;
        }
        n.backward(*n.grad, targets);
    }

    Gradients out;
    for (const auto& n : nodes_) {
        if (n->param != nullptr && n->grad) {
            out.add(n->param, std::move(*n->grad));
        }
    }
    return out;
}

// ---- ops -------------------------------------------------------------------

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()) + " differ");
    }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
    if (a.value().rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got shape " + shape_string(a.shape()));
    }
}

void accumulate(Tensor* target, const Tensor& g, double s = 1.0) {
    if (target == nullptr) {
        return;
    }
    double* t = target->data();
    const double* src = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        t[i] += s * src[i];
    }
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value() + b.value();
    return a.graph().record("add", std::move(out), {a, b},
                            [](const Tensor& g, std::span<Tensor* const> t) {
                                accumulate(t[0], g);
                                accumulate(t[1], g);
                            });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value() - b.value();
    return a.graph().record("sub", std::move(out), {a, b},
                            [](const Tensor& g, std::span<Tensor* const> t) {
                                accumulate(t[0], g);
                                accumulate(t[1], g, -1.0);
                            });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    const Tensor* av = &a.value();
    const Tensor* bv = &b.value();
    Tensor out = *av;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= (*bv)[i];
    }
    return a.graph().record("mul", std::move(out), {a, b},
                            [av, bv](const Tensor& g, std::span<Tensor* const> t) {
                                for (std::size_t i = 0; i < g.size(); ++i) {
                                    if (t[0]) (*t[0])[i] += g[i] * (*bv)[i];
                                    if (t[1]) (*t[1])[i] += g[i] * (*av)[i];
                                }
                            });
}

Var scale(const Var& a, double s) {
    return affine(a, s, 0.0);
}

Var affine(const Var& a, double s, double shift) {
    Tensor out = a.value();
    for (double& v : out.values()) {
        v = v * s + shift;
    }
    return a.graph().record("affine", std::move(out), {a},
                            [s](const Tensor& g, std::span<Tensor* const> t) {
                                accumulate(t[0], g, s);
                            });
}

Var matmul(const Var& a, const Var& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw DimensionError("matmul: inner dimensions differ for " + shape_string(a.shape()) +
                             " x " + shape_string(b.shape()));
    }
    const Tensor* av = &a.value();
    const Tensor* bv = &b.value();
    Tensor out({m, n});
    const double* A = av->data();
    const double* B = bv->data();
    double* C = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) {
                continue;
            }
            const double* brow = B + p * n;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aip * brow[j];
            }
        }
    }
    return a.graph().record(
        "matmul", std::move(out), {a, b}, [av, bv, m, k, n](const Tensor& g, std::span<Tensor* const> t) {
            const double* G = g.data();
            const double* A = av->data();
            const double* B = bv->data();
            if (t[0]) {
                double* dA = t[0]->data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        const double* brow = B + p * n;
                        const double* grow = G + i * n;
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            s += grow[j] * brow[j];
                        }
                        dA[i * k + p] += s;
                    }
                }
            }
            if (t[1]) {
                double* dB = t[1]->data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A[i * k + p];
                        const double* grow = G + i * n;
                        double* drow = dB + p * n;
                        for (std::size_t j = 0; j < n; ++j) {
                            drow[j] += aip * grow[j];
                        }
                    }
                }
            }
        });
}

Var transpose(const Var& a) {
    require_rank(a, 2, "transpose");
    return permute(a, {1, 0});
}

Var add_row_bias(const Var& x, const Var& bias) {
    require_rank(x, 2, "add_row_bias");
    require_rank(bias, 1, "add_row_bias");
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    if (bias.shape()[0] != cols) {
        throw DimensionError("add_row_bias: bias " + shape_string(bias.shape()) +
                             " does not match rows of " + shape_string(x.shape()));
    }
    Tensor out = x.value();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] += bias.value()[c];
        }
    }
    return x.graph().record("add_row_bias", std::move(out), {x, bias},
                            [rows, cols](const Tensor& g, std::span<Tensor* const> t) {
                                accumulate(t[0], g);
                                if (t[1]) {
                                    for (std::size_t r = 0; r < rows; ++r) {
                                        for (std::size_t c = 0; c < cols; ++c) {
                                            (*t[1])[c] += g[r * cols + c];
                                        }
                                    }
                                }
                            });
}

Var relu(const Var& x) {
    const Tensor* xv = &x.value();
    Tensor out = *xv;
    for (double& v : out.values()) {
        v = v > 0.0 ? v : 0.0;
    }
    return x.graph().record("relu", std::move(out), {x},
                            [xv](const Tensor& g, std::span<Tensor* const> t) {
                                for (std::size_t i = 0; i < g.size(); ++i) {
                                    if ((*xv)[i] > 0.0) {
                                        (*t[0])[i] += g[i];
                                    }
                                }
                            });
}

Var reshape(const Var& x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    return x.graph().record("reshape", std::move(out), {x},
                            [](const Tensor& g, std::span<Tensor* const> t) {
                                accumulate(t[0], g);
                            });
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) {
        strides[i - 1] = strides[i] * shape[i];
    }
    return strides;
}

}  // namespace

Var permute(const Var& x, const std::vector<std::size_t>& axes) {
    const Shape& in_shape = x.shape();
    const std::size_t rank = in_shape.size();
    if (axes.size() != rank) {
        throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for shape " +
                             shape_string(in_shape));
    }
    std::vector<bool> seen(rank, false);
    Shape out_shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (axes[i] >= rank || seen[axes[i]]) {
            throw IndexError("permute: invalid axis list for shape " + shape_string(in_shape));
        }
        seen[axes[i]] = true;
        out_shape[i] = in_shape[axes[i]];
    }
    const auto in_strides = strides_of(in_shape);
    auto index = std::make_shared<std::vector<std::size_t>>(x.value().size());
    std::vector<std::size_t> counter(rank, 0);
    for (std::size_t flat = 0; flat < index->size(); ++flat) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < rank; ++i) {
            src += counter[i] * in_strides[axes[i]];
        }
        (*index)[flat] = src;
        for (std::size_t i = rank; i-- > 0;) {
            if (++counter[i] < out_shape[i]) {
                break;
            }
            counter[i] = 0;
        }
    }
    return gather(x, std::move(out_shape), std::move(index));
}

Var gather(const Var& x, Shape out_shape, std::shared_ptr<const std::vector<std::size_t>> index) {
    Tensor out(std::move(out_shape));
    if (index->size() != out.size()) {
        throw DimensionError("gather: index has " + std::to_string(index->size()) +
                             " entries for output shape " + shape_string(out.shape()));
    }
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t src = (*index)[i];
        if (src >= xv.size()) {
            throw IndexError("gather: source index " + std::to_string(src) + " out of range");
        }
        out[i] = xv[src];
    }
    return x.graph().record("gather", std::move(out), {x},
                            [index](const Tensor& g, std::span<Tensor* const> t) {
                                for (std::size_t i = 0; i < g.size(); ++i) {
                                    (*t[0])[(*index)[i]] += g[i];
                                }
                            });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) {
        throw ContractError("concat of zero tensors");
    }
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) {
        throw IndexError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(first));
    }
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const Var& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size()) {
            throw DimensionError("concat: rank mismatch " + shape_string(first) + " vs " +
                                 shape_string(s));
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i != axis && s[i] != first[i]) {
                throw DimensionError("concat: shape mismatch " + shape_string(first) + " vs " +
                                     shape_string(s));
            }
        }
        out_shape[axis] += s[axis];
    }
    // outer = product of dims before axis, inner = product after axis.
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i) {
        outer *= first[i];
    }
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < first.size(); ++i) {
        inner *= first[i];
    }
    Tensor out(out_shape);
    std::vector<std::size_t> widths;
    std::size_t offset = 0;
    const std::size_t out_row = out_shape[axis] * inner;
    for (const Var& p : parts) {
        const std::size_t w = p.shape()[axis] * inner;
        const Tensor& v = p.value();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(v.data() + o * w, w, out.data() + o * out_row + offset);
        }
        widths.push_back(w);
        offset += w;
    }
    return parts.front().graph().record(
        "concat", std::move(out), parts,
        [widths, outer, out_row](const Tensor& g, std::span<Tensor* const> t) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < widths.size(); ++k) {
                if (t[k]) {
                    for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t i = 0; i < widths[k]; ++i) {
                            (*t[k])[o * widths[k] + i] += g[o * out_row + off + i];
                        }
                    }
                }
                off += widths[k];
            }
        });
}

Var sum(const Var& x) {
    const auto& v = x.value().values();
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    return x.graph().record("sum", Tensor::scalar(s), {x},
                            [](const Tensor& g, std::span<Tensor* const> t) {
                                const double gv = g[0];
                                for (double& d : t[0]->values()) {
                                    d += gv;
                                }
                            });
}

Var mean(const Var& x) {
    return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var l2_normalize_rows(const Var& x, double eps) {
    require_rank(x, 2, "l2_normalize_rows");
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    const Tensor* xv = &x.value();
    std::vector<double> denom(rows);
    std::vector<bool> clamped(rows);
    Tensor out = *xv;
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            s += (*xv)[r * cols + c] * (*xv)[r * cols + c];
        }
        const double norm = std::sqrt(s);
        clamped[r] = norm < eps;
        denom[r] = clamped[r] ? eps : norm;
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] /= denom[r];
        }
    }
    return x.graph().record(
        "l2_normalize_rows", std::move(out), {x},
        [xv, rows, cols, denom = std::move(denom), clamped = std::move(clamped)](
            const Tensor& g, std::span<Tensor* const> t) {
            for (std::size_t r = 0; r < rows; ++r) {
                const double d = denom[r];
                if (clamped[r]) {
                    for (std::size_t c = 0; c < cols; ++c) {
                        (*t[0])[r * cols + c] += g[r * cols + c] / d;
                    }
                    continue;
                }
                // d(x/|x|) = (g - y <y, g>) / |x| with y = x/|x|
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    dot += g[r * cols + c] * (*xv)[r * cols + c] / d;
                }
                for (std::size_t c = 0; c < cols; ++c) {
                    const double y = (*xv)[r * cols + c] / d;
                    (*t[0])[r * cols + c] += (g[r * cols + c] - y * dot) / d;
                }
            }
        });
}

Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> labels) {
    require_rank(logits, 2, "softmax_cross_entropy");
    const std::size_t rows = logits.shape()[0];
    const std::size_t classes = logits.shape()[1];
    if (labels.size() != rows) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for logits " + shape_string(logits.shape()));
    }
    for (std::size_t label : labels) {
        if (label >= classes) {
            throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                             " out of range for " + std::to_string(classes) + " classes");
        }
    }
    const Tensor& z = logits.value();
    Tensor probs({rows, classes});
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = z.data() + r * classes;
        const double mx = *std::max_element(row, row + classes);
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            s += std::exp(row[c] - mx);
        }
        const double log_s = std::log(s);
        for (std::size_t c = 0; c < classes; ++c) {
            probs[r * classes + c] = std::exp(row[c] - mx - log_s);
        }
        loss += log_s + mx - row[labels[r]];
    }
    loss /= static_cast<double>(rows);
    std::vector<std::size_t> lab(labels.begin(), labels.end());
    return logits.graph().record(
        "softmax_cross_entropy", Tensor::scalar(loss), {logits},
        [probs = std::move(probs), lab = std::move(lab), rows, classes](
            const Tensor& g, std::span<Tensor* const> t) {
            const double s = g[0] / static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < classes; ++c) {
                    const double target = c == lab[r] ? 1.0 : 0.0;
                    (*t[0])[r * classes + c] += s * (probs[r * classes + c] - target);
                }
            }
        });
}

Var stop_gradient(const Var& x) {
    return x.graph().constant(x.value());
}

}  // namespace bassl
