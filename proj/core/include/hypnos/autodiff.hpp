#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hypnos/tensor.hpp"

namespace hypnos::ad {

// Tensor-level reverse-mode autodiff. Each forward op records a closure that
// scatters the node's gradient into its parents; backward() runs the tape in
// reverse topological order. Graphs are built per training step and dropped
// afterwards.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;          // allocated lazily, same shape as val
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;  // empty for leaves/constants
    int visit_mark = 0;

    Tensor& g();  // grad, allocating zeros on first touch
};

Var constant(Tensor t);
Var leaf(Tensor t, bool requires_grad = true);

// Elementwise / scalar-broadcast arithmetic.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);

// Activations.
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var silu(const Var& a);
Var exp_(const Var& a);

// Reductions (scalar results).
Var sum(const Var& a);
Var mean(const Var& a);
Var mse(const Var& a, const Var& b);  // mean squared elementwise difference

// Linear algebra on 2-d tensors.
Var matmul(const Var& a, const Var& b);                 // [m,k]x[k,n] -> [m,n]
Var matvec(const Var& w, const Var& x);                 // [m,k]x[k] -> [m]
Var transpose(const Var& a);                            // [m,n] -> [n,m]
Var add_rowvec(const Var& x, const Var& v);             // [t,d]+[d]
Var softmax_rows(const Var& a);                         // row-wise softmax
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Conv / spatial ops on [C,H,W].
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var depthwise_conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);  // w: [C,1,kh,kw]
Var concat_rows(const Var& a, const Var& b);  // [m,d] + [n,d] -> [m+n,d]
Var add_chan_bias(const Var& x, const Var& bias);
Var concat_chan(const Var& a, const Var& b);
Var global_avg_pool(const Var& x);                      // [C,H,W] -> [C]
Var patches(const Var& x, int p);                       // -> [N, C*p*p]
Var reshape(const Var& a, std::vector<int> shape);

// Row gathering for embedding tables; result is the mean of the gathered rows.
Var rows_mean(const Var& table, const std::vector<int>& idx);
Var row(const Var& a, int r);
Var clamp01(const Var& a);  // clamp to [0,1]; zero gradient where clipped

void backward(const Var& root);

}  // namespace hypnos::ad
