#pragma once

#include <functional>
#include <vector>

#include "cdk/tensor.hpp"

namespace cdk {

/// Reverse-mode tape over TensorF values. Nodes are created in topological
/// order by the op builders below; backward() walks them in reverse and
/// accumulates gradients into every node created with needs_grad.
///
/// A tape records one forward pass; build a fresh tape per evaluation.
class Tape {
public:
    int leaf(TensorF value, bool needs_grad = false);

    int add(int a, int b);
    int scale(int a, float s);
    int swish(int x);

    /// x [C,H,W] + per-channel bias b [C] broadcast over HxW.
    int add_channel_bias(int x, int b);
    /// a [N,M] + bias b [M] added to every row.
    int add_col_bias(int a, int b);
    /// a [N,M] + constant vector v [M] added to every row (no grad through v).
    int add_row_const(int a, const TensorF& v);

    /// 2-D convolution, x [Cin,H,W], w [Cout,Cin,K,K], b [Cout].
    int conv2d(int x, int w, int b, int stride, int pad);
    int upsample_nearest(int x, int factor);
    int group_norm(int x, int gamma, int beta, int groups, float eps = 1e-5f);

    int matmul(int a, int b);  // [N,K] x [K,M]
    int transpose(int a);      // [N,M] -> [M,N]
    int reshape(int a, std::vector<int> shape);
    int softmax_rows(int a);   // softmax over the last dim of [N,M]

    /// Vector x [N] through W [N,M] plus bias b [M] -> [M].
    int linear(int x, int w, int b);

    /// Scalar node: mean((a - target)^2). Accumulated in double.
    int mse(int a, const TensorF& target);
    /// Scalar node: mean of all elements.
    int mean_all(int a);

    void backward(int node);

    const TensorF& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    /// Valid after backward() for nodes created with needs_grad.
    const TensorF& grad(int id) const;
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        TensorF value;
        TensorF grad;
        bool needs_grad = false;
        bool grad_ready = false;
        std::function<void(Tape&, int)> backprop;  // reads grad of self, adds to parents
    };

    int push(TensorF value, bool needs_grad, std::function<void(Tape&, int)> backprop);
    TensorF& grad_buf(int id);
    void accumulate(int id, const TensorF& g);

    std::vector<Node> nodes_;
};

// Plain helpers shared by forward and backward passes.
void matmul_accumulate(const float* a, const float* b, float* out, int n, int k, int m,
                       bool accumulate);

}  // namespace cdk
