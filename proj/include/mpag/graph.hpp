#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mpag/errors.hpp"
#include "mpag/params.hpp"
#include "mpag/tensor.hpp"

namespace mpag {

class Graph;

/// Node in a dynamically built computation graph. Parents are the operation
/// inputs; `backward` reads this node's gradient and accumulates into the
/// parents' gradients.
struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Node*> parents;
    std::function<void(Node&)> backward;
    Tensor* external_grad = nullptr; // parameter leaves write here after backward
    Graph* graph = nullptr;
};

/// Lightweight handle to a graph node.
class Value {
  public:
    Value() = default;

    const Tensor& val() const { return node_->value; }
    std::size_t size() const { return node_->value.size(); }
    double scalar() const {
        if (size() != 1) throw ShapeError("scalar() on tensor of size " + std::to_string(size()));
        return node_->value.data[0];
    }
    bool valid() const { return node_ != nullptr; }
    Node* node() const { return node_; }

  private:
    friend class Graph;
    explicit Value(Node* n) : node_(n) {}
    Node* node_ = nullptr;
};

/// Arena owning one example's computation graph. Nodes are created in
/// topological order, so reverse creation order is a valid reverse
/// topological order for backpropagation.
class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Value make(Tensor value, std::vector<Node*> parents = {},
               std::function<void(Node&)> backward = nullptr, Tensor* external_grad = nullptr) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backward = std::move(backward);
        n.external_grad = external_grad;
        n.graph = this;
        return Value(&n);
    }

    Value constant(Tensor t) { return make(std::move(t)); }
    Value constant_scalar(double v) { return make(Tensor::scalar(v)); }

    /// Leaf bound to a named parameter. One node per parameter per graph, so
    /// every use shares the same gradient slot.
    Value param(ParamStore& store, const std::string& name) {
        Param& p = store.at(name);
        auto it = param_cache_.find(&p);
        if (it != param_cache_.end()) return Value(it->second);
        Value v = make(p.value, {}, nullptr, &p.grad);
        param_cache_.emplace(&p, v.node());
        return v;
    }

    std::size_t node_count() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

    /// Reverse pass from a scalar loss. Seeds the loss gradient with
    /// `seed` (1/batch for mean-of-batch losses), fires each node's backward
    /// rule exactly once in reverse creation order, then flushes leaf
    /// gradients into their bound parameter slots.
    void backward(Value loss, double seed = 1.0) {
        if (backward_done_) throw GraphError("backward called twice on the same graph");
        if (loss.size() != 1) throw GraphError("backward requires a scalar loss node");
        if (loss.node()->graph != this) throw GraphError("loss node belongs to another graph");
        backward_done_ = true;
        for (Node& n : nodes_) n.grad = Tensor::zeros_like(n.value);
        loss.node()->grad.data[0] = seed;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->backward) it->backward(*it);
            if (it->external_grad) {
                Tensor& eg = *it->external_grad;
                for (std::size_t i = 0; i < eg.size(); ++i) eg.data[i] += it->grad.data[i];
            }
        }
    }

  private:
    std::deque<Node> nodes_;
    std::map<const Param*, Node*> param_cache_;
    bool backward_done_ = false;
};

namespace detail {
inline Graph& graph_of(Value v) { return *v.node()->graph; }
inline void require_same_graph(Value a, Value b, const char* op) {
    if (a.node()->graph != b.node()->graph)
        throw GraphError(std::string(op) + ": operands from different graphs");
}
} // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations. Each constructs one node with an exact reverse rule.
// ---------------------------------------------------------------------------

inline Value add(Value a, Value b) {
    detail::require_same_graph(a, b, "add");
    require_same_shape(a.val(), b.val(), "add");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.val().data[i];
    return detail::graph_of(a).make(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad.data[i] += n.grad.data[i];
            n.parents[1]->grad.data[i] += n.grad.data[i];
        }
    });
}

inline Value sub(Value a, Value b) {
    detail::require_same_graph(a, b, "sub");
    require_same_shape(a.val(), b.val(), "sub");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.val().data[i];
    return detail::graph_of(a).make(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad.data[i] += n.grad.data[i];
            n.parents[1]->grad.data[i] -= n.grad.data[i];
        }
    });
}

/// Elementwise product.
inline Value mul(Value a, Value b) {
    detail::require_same_graph(a, b, "mul");
    require_same_shape(a.val(), b.val(), "mul");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.val().data[i];
    return detail::graph_of(a).make(std::move(out), {a.node(), b.node()}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad.data[i] += n.grad.data[i] * n.parents[1]->value.data[i];
            n.parents[1]->grad.data[i] += n.grad.data[i] * n.parents[0]->value.data[i];
        }
    });
}

/// Sum of k same-shaped tensors.
inline Value add_n(std::span<const Value> xs) {
    if (xs.empty()) throw ShapeError("add_n: empty operand list");
    Tensor out = xs[0].val();
    std::vector<Node*> parents{xs[0].node()};
    for (std::size_t k = 1; k < xs.size(); ++k) {
        detail::require_same_graph(xs[0], xs[k], "add_n");
        require_same_shape(out, xs[k].val(), "add_n");
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += xs[k].val().data[i];
        parents.push_back(xs[k].node());
    }
    return detail::graph_of(xs[0]).make(std::move(out), std::move(parents), [](Node& n) {
        for (Node* p : n.parents)
            for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad.data[i] += n.grad.data[i];
    });
}

inline Value add_n(const std::vector<Value>& xs) { return add_n(std::span<const Value>(xs)); }

/// Multiply by a compile-time constant.
inline Value scale(Value a, double c) {
    Tensor out = a.val();
    for (double& v : out.data) v *= c;
    return detail::graph_of(a).make(std::move(out), {a.node()}, [c](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad.data[i] += c * n.grad.data[i];
    });
}

/// Vector times a scalar node.
inline Value scale_by(Value vec, Value s) {
    detail::require_same_graph(vec, s, "scale_by");
    if (s.size() != 1) throw ShapeError("scale_by: scale operand must be a scalar node");
    double sv = s.val().data[0];
    Tensor out = vec.val();
    for (double& v : out.data) v *= sv;
    return detail::graph_of(vec).make(std::move(out), {vec.node(), s.node()}, [](Node& n) {
        const Tensor& vecv = n.parents[0]->value;
        double sval = n.parents[1]->value.data[0];
        double sgrad = 0.0;
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            n.parents[0]->grad.data[i] += sval * n.grad.data[i];
            sgrad += vecv.data[i] * n.grad.data[i];
        }
        n.parents[1]->grad.data[0] += sgrad;
    });
}

/// Matrix (m x n) times vector (n) -> vector (m).
inline Value matvec(Value w, Value x) {
    detail::require_same_graph(w, x, "matvec");
    if (w.val().rank() != 2 || x.val().rank() != 1)
        throw ShapeError("matvec: expected matrix and vector operands");
    std::size_t m = w.val().rows(), n = w.val().cols();
    if (n != x.size())
        throw ShapeError("matvec: " + w.val().shape_str() + " times " + x.val().shape_str());
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += w.val().at(i, j) * x.val().data[j];
        out.data[i] = acc;
    }
    return detail::graph_of(w).make(std::move(out), {w.node(), x.node()}, [m, n](Node& nd) {
        const Tensor& wv = nd.parents[0]->value;
        const Tensor& xv = nd.parents[1]->value;
        for (std::size_t i = 0; i < m; ++i) {
            double g = nd.grad.data[i];
            if (g == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                nd.parents[0]->grad.data[i * n + j] += g * xv.data[j];
                nd.parents[1]->grad.data[j] += g * wv.data[i * n + j];
            }
        }
    });
}

/// Wx + b.
inline Value affine(Value w, Value x, Value b) { return add(matvec(w, x), b); }

inline Value sigmoid(Value x) {
    Tensor out = x.val();
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return detail::graph_of(x).make(std::move(out), {x.node()}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double y = n.value.data[i];
            n.parents[0]->grad.data[i] += n.grad.data[i] * y * (1.0 - y);
        }
    });
}

inline Value tanh(Value x) {
    Tensor out = x.val();
    for (double& v : out.data) v = std::tanh(v);
    return detail::graph_of(x).make(std::move(out), {x.node()}, [](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double y = n.value.data[i];
            n.parents[0]->grad.data[i] += n.grad.data[i] * (1.0 - y * y);
        }
    });
}

namespace detail {
inline Tensor softmax_forward(const Tensor& logits, const std::vector<std::uint8_t>* keep) {
    std::size_t n = logits.size();
    Tensor out({n});
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (!keep || (*keep)[i]) mx = std::max(mx, logits.data[i]);
    if (mx == -std::numeric_limits<double>::infinity())
        throw ShapeError("softmax: empty support (all positions masked)");
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep || (*keep)[i]) {
            out.data[i] = std::exp(logits.data[i] - mx);
            z += out.data[i];
        } else {
            out.data[i] = 0.0;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!keep || (*keep)[i]) out.data[i] /= z;
    return out;
}

inline void softmax_backward(Node& n) {
    // dx_i = y_i * (g_i - sum_j g_j y_j); masked positions have y_i = 0.
    double dot = 0.0;
    for (std::size_t i = 0; i < n.grad.size(); ++i) dot += n.grad.data[i] * n.value.data[i];
    for (std::size_t i = 0; i < n.grad.size(); ++i)
        n.parents[0]->grad.data[i] += n.value.data[i] * (n.grad.data[i] - dot);
}
} // namespace detail

/// Numerically stable softmax over all positions.
inline Value softmax(Value logits) {
    if (logits.val().rank() != 1) throw ShapeError("softmax: expected vector");
    Tensor out = detail::softmax_forward(logits.val(), nullptr);
    return detail::graph_of(logits).make(std::move(out), {logits.node()}, detail::softmax_backward);
}

/// Softmax restricted to positions with keep[i] != 0. Masked positions get
/// exactly zero probability and zero gradient.
inline Value softmax_masked(Value logits, const std::vector<std::uint8_t>& keep) {
    if (logits.val().rank() != 1) throw ShapeError("softmax_masked: expected vector");
    if (keep.size() != logits.size())
        throw ShapeError("softmax_masked: mask length does not match logits");
    Tensor out = detail::softmax_forward(logits.val(), &keep);
    return detail::graph_of(logits).make(std::move(out), {logits.node()}, detail::softmax_backward);
}

inline Value concat(std::span<const Value> xs) {
    if (xs.empty()) throw ShapeError("concat: empty operand list");
    std::size_t total = 0;
    std::vector<Node*> parents;
    for (Value v : xs) {
        detail::require_same_graph(xs[0], v, "concat");
        if (v.val().rank() != 1) throw ShapeError("concat: expected vectors");
        total += v.size();
        parents.push_back(v.node());
    }
    Tensor out({total});
    std::size_t off = 0;
    for (Value v : xs) {
        std::copy(v.val().data.begin(), v.val().data.end(), out.data.begin() + off);
        off += v.size();
    }
    return detail::graph_of(xs[0]).make(std::move(out), std::move(parents), [](Node& n) {
        std::size_t off2 = 0;
        for (Node* p : n.parents) {
            for (std::size_t i = 0; i < p->value.size(); ++i)
                p->grad.data[i] += n.grad.data[off2 + i];
            off2 += p->value.size();
        }
    });
}

inline Value concat(std::initializer_list<Value> xs) {
    std::vector<Value> v(xs);
    return concat(std::span<const Value>(v));
}

inline Value slice(Value x, std::size_t offset, std::size_t len) {
    if (x.val().rank() != 1) throw ShapeError("slice: expected vector");
    if (offset + len > x.size()) throw ShapeError("slice: out of range");
    Tensor out({len});
    std::copy(x.val().data.begin() + offset, x.val().data.begin() + offset + len,
              out.data.begin());
    return detail::graph_of(x).make(std::move(out), {x.node()}, [offset](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.parents[0]->grad.data[offset + i] += n.grad.data[i];
    });
}

inline Value dot(Value a, Value b) {
    detail::require_same_graph(a, b, "dot");
    require_same_shape(a.val(), b.val(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.val().data[i] * b.val().data[i];
    return detail::graph_of(a).make(Tensor::scalar(acc), {a.node(), b.node()}, [](Node& n) {
        double g = n.grad.data[0];
        for (std::size_t i = 0; i < n.parents[0]->value.size(); ++i) {
            n.parents[0]->grad.data[i] += g * n.parents[1]->value.data[i];
            n.parents[1]->grad.data[i] += g * n.parents[0]->value.data[i];
        }
    });
}

inline Value sum(Value x) {
    double acc = 0.0;
    for (double v : x.val().data) acc += v;
    return detail::graph_of(x).make(Tensor::scalar(acc), {x.node()}, [](Node& n) {
        double g = n.grad.data[0];
        for (std::size_t i = 0; i < n.parents[0]->value.size(); ++i)
            n.parents[0]->grad.data[i] += g;
    });
}

/// Select one element as a scalar node.
inline Value pick(Value x, std::size_t index) {
    if (index >= x.size()) throw ShapeError("pick: index out of range");
    return detail::graph_of(x).make(Tensor::scalar(x.val().data[index]), {x.node()},
                                    [index](Node& n) {
                                        n.parents[0]->grad.data[index] += n.grad.data[0];
                                    });
}

/// ln(max(x, floor)) elementwise. Floored positions get zero gradient.
inline Value log_floor(Value x, double floor = 1e-12) {
    Tensor out = x.val();
    for (double& v : out.data) v = std::log(std::max(v, floor));
    return detail::graph_of(x).make(std::move(out), {x.node()}, [floor](Node& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            double xv = n.parents[0]->value.data[i];
            if (xv > floor) n.parents[0]->grad.data[i] += n.grad.data[i] / xv;
        }
    });
}

/// Per-dimension max over k same-shaped vectors. Ties route the gradient to
/// the first (lowest-index) maximizer.
inline Value max_reduce(std::span<const Value> xs) {
    if (xs.empty()) throw ShapeError("max_reduce: empty operand list");
    std::size_t n = xs[0].size();
    std::vector<Node*> parents;
    for (Value v : xs) {
        detail::require_same_graph(xs[0], v, "max_reduce");
        require_same_shape(xs[0].val(), v.val(), "max_reduce");
        parents.push_back(v.node());
    }
    Tensor out = xs[0].val();
    std::vector<std::uint32_t> argmax(n, 0);
    for (std::size_t k = 1; k < xs.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            if (xs[k].val().data[i] > out.data[i]) {
                out.data[i] = xs[k].val().data[i];
                argmax[i] = static_cast<std::uint32_t>(k);
            }
        }
    }
    return detail::graph_of(xs[0]).make(std::move(out), std::move(parents),
                                        [argmax = std::move(argmax)](Node& nd) {
                                            for (std::size_t i = 0; i < nd.grad.size(); ++i)
                                                nd.parents[argmax[i]]->grad.data[i] +=
                                                    nd.grad.data[i];
                                        });
}

inline Value max_reduce(const std::vector<Value>& xs) {
    return max_reduce(std::span<const Value>(xs));
}

/// Cosine similarity in [-1, 1]. A zero-norm input signals no addressable
/// content: the result is 0 with zero gradient.
inline Value cosine(Value a, Value b) {
    detail::require_same_graph(a, b, "cosine");
    require_same_shape(a.val(), b.val(), "cosine");
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a.val().data[i] * b.val().data[i];
        na += a.val().data[i] * a.val().data[i];
        nb += b.val().data[i] * b.val().data[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    double y = (na == 0.0 || nb == 0.0) ? 0.0 : d / (na * nb);
    return detail::graph_of(a).make(Tensor::scalar(y), {a.node(), b.node()}, [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        double d2 = 0.0, na2 = 0.0, nb2 = 0.0;
        for (std::size_t i = 0; i < av.size(); ++i) {
            d2 += av.data[i] * bv.data[i];
            na2 += av.data[i] * av.data[i];
            nb2 += bv.data[i] * bv.data[i];
        }
        double na1 = std::sqrt(na2), nb1 = std::sqrt(nb2);
        if (na1 == 0.0 || nb1 == 0.0) return;
        double g = n.grad.data[0];
        double inv = 1.0 / (na1 * nb1);
        for (std::size_t i = 0; i < av.size(); ++i) {
            n.parents[0]->grad.data[i] += g * (bv.data[i] * inv - d2 * av.data[i] / (na2 * na1 * nb1));
            n.parents[1]->grad.data[i] += g * (av.data[i] * inv - d2 * bv.data[i] / (nb2 * nb1 * na1));
        }
    });
}

/// Row of a matrix node (embedding lookup). Gradient accumulates into that
/// row only.
inline Value row(Value m, std::size_t index) {
    if (m.val().rank() != 2) throw ShapeError("row: expected matrix");
    if (index >= m.val().rows()) throw ShapeError("row: index out of range");
    std::size_t c = m.val().cols();
    Tensor out({c});
    std::copy(m.val().data.begin() + index * c, m.val().data.begin() + (index + 1) * c,
              out.data.begin());
    return detail::graph_of(m).make(std::move(out), {m.node()}, [index, c](Node& n) {
        for (std::size_t i = 0; i < c; ++i)
            n.parents[0]->grad.data[index * c + i] += n.grad.data[i];
    });
}

} // namespace mpag
