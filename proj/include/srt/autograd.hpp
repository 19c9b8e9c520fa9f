#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Graph records every op applied to its Vars. Nodes that do not depend on a
// trainable leaf carry no backward closure, so a Graph built over frozen
// weights is a plain forward evaluator.

#include "srt/common.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace srt {

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;  // same shape as value once zero_grad() has run
    bool trainable = false;
};

namespace ag {

class Graph;

class Var {
public:
    Var() = default;

    Graph* graph() const { return graph_; }
    int id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }

private:
    friend class Graph;
    Var(Graph* g, int id) : graph_(g), id_(id) {}

    Graph* graph_ = nullptr;
    int id_ = -1;
};

class Graph {
public:
    using Backward = std::function<void(Graph&, const Matrix& grad_out)>;

    Graph() = default;
    // With record=false no node ever needs a gradient (pure evaluation).
    explicit Graph(bool record) : record_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Constant input; never receives a gradient.
    Var input(Matrix value);
    // Leaf that collects a gradient readable through grad() after backward().
    Var leaf(Matrix value);
    // Leaf bound to a parameter. Gradients flow into p.grad only when trainable.
    Var param(Parameter& p);

    const Matrix& value(Var v) const {
        const Node& n = nodes_[static_cast<size_t>(v.id())];
        return n.param != nullptr ? n.param->value : n.value;
    }
    // Gradient of the last backward() target w.r.t. v (zero matrix if unreached).
    Matrix grad(Var v) const;
    bool needs_grad(Var v) const { return nodes_[static_cast<size_t>(v.id())].needs_grad; }

    // Seeds d(target)/d(target) = 1 for a 1x1 target and propagates.
    void backward(Var target);

    // Op plumbing.
    Var emit(Matrix value, std::initializer_list<Var> parents, Backward backward);
    Var emit(Matrix value, std::span<const Var> parents, Backward backward);
    void accumulate(Var v, const Matrix& g);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        Backward backward;
        Parameter* param = nullptr;
    };

    std::vector<Node> nodes_;
    bool record_ = true;
};

// C = A B
Var matmul(Var a, Var b);
// C = A B^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
// Adds a 1 x n row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var relu(Var a);
// tanh approximation
Var gelu(Var a);
// Row-wise normalisation with affine gamma/beta rows.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
// Row-wise softmax. When causal, row i only sees columns j <= i + causal_offset.
Var softmax_rows(Var scores, bool causal = false, Eigen::Index causal_offset = 0);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
// Rows of table selected by ids.
Var gather_rows(Var table, std::span<const int> ids);
// Elementwise product with a constant mask (dropout).
Var mul_const(Var a, const Matrix& mask);
Var sum(Var a);
// Mean token cross-entropy; rows with target < 0 are excluded.
Var cross_entropy(Var logits, std::span<const int> targets);
// Scaled dot-product attention over `heads` column groups of q, k, v.
// With causal set, query row i sees key rows j <= i + (k.rows() - q.rows()).
Var multi_head_attention(Var q, Var k, Var v, int heads, bool causal);

}  // namespace ag
}  // namespace srt
