#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace transfact::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

class Graph;

/// Handle to a node of a Graph.
struct Var {
    Graph* graph = nullptr;
    int id = -1;

    bool valid() const { return graph != nullptr; }
    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order, so reverse insertion order is a valid topological order.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, const Matrix& grad_out)>;

    Var constant(Matrix value);
    /// Leaf bound to external storage; its gradient is reported under
    /// `param_index`. The storage must outlive the graph.
    Var parameter(const Matrix& storage, int param_index);

    Var make(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
        return make(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
    }
    Var make(Matrix value, std::span<const Var> parents, BackwardFn backward);

    const Matrix& value(Var v) const { return node_value(nodes_[v.id]); }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    /// Adds `g` into the gradient of `v` (no-op for constants).
    template <typename Expr>
    void accumulate(Var v, const Expr& g) {
        Node& n = nodes_[v.id];
        if (!n.requires_grad) {
            return;
        }
        if (!n.has_grad) {
            n.grad = g;
            n.has_grad = true;
        } else {
            n.grad += g;
        }
    }

    /// Seeds d(output)/d(output) = 1 for a 1x1 output and propagates.
    void backward(Var output);

    /// Gradient of a node after backward(); zero matrix when none reached it.
    Matrix grad(Var v) const;

    /// Adds every parameter leaf's gradient into grads[param_index].
    void collect_parameter_grads(std::span<Matrix> grads) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        const Matrix* external = nullptr;
        Matrix grad;
        bool has_grad = false;
        bool requires_grad = false;
        int param_index = -1;
        BackwardFn backward;
    };

    static const Matrix& node_value(const Node& n) { return n.external ? *n.external : n.value; }

    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operations. All shapes are checked; mismatches throw a shape error.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1xC row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var gelu(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// log(max(a, floor)); zero gradient where clamped.
Var log_clamped(Var a, double floor);
Var transpose(Var a);
/// Divides each row by its sum.
Var normalize_rows(Var a);
/// Mean over rows, giving 1xC.
Var mean_rows(Var a);
Var concat_cols(Var a, Var b);
/// Rows of a kernel-3 dilated convolution window: out(t, k*C + c) =
/// x(t + (k-1)*dilation, c), zero outside [0, T).
Var im2col_dilated(Var x, int dilation);

/// Stacked per-head attention probabilities: rows [h*Lq, (h+1)*Lq) hold
/// softmax(Q_h K_h^T / sqrt(d_h)).
Var attention_probs(Var q, Var k, int heads);
/// Concatenated per-head P_h V_h.
Var attention_mix(Var probs, Var v, int heads);
/// Mean of the per-head probability maps.
Var head_mean(Var probs, int heads);

struct Pick {
    Eigen::Index row;
    Eigen::Index col;
    double coef;
};
/// Scalar sum of coef * a(row, col).
Var pick_sum(Var a, std::vector<Pick> picks);
/// Scalar sum of w_i * s_i over 1x1 inputs.
Var weighted_sum(std::span<const std::pair<Var, double>> terms);
/// Truncated temporal MSE: mean over (T-1)*C of min(|a_t - a_{t-1}|, clamp)^2.
Var truncated_tmse(Var a, double clamp);

double scalar(Var v);

} // namespace transfact::ad
