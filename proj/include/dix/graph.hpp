#pragma once

#include "dix/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace dix::graph {

// Minimal reverse-mode tape. Nodes are appended in forward order, so reverse
// creation order is a valid topological order for the backward sweep; all
// accumulation loops are serial and fixed-order, which keeps gradients
// bitwise reproducible.
struct Node {
    Tensor value;
    Tensor grad; // allocated on demand, same shape as value
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backprop; // reads this->grad, accumulates into inputs

    Tensor& ensure_grad() {
        if (!grad.same_shape(value)) grad = Tensor::zeros(value.shape());
        return grad;
    }
};

using NodeRef = std::shared_ptr<Node>;

class Tape {
public:
    NodeRef leaf(Tensor value, bool needs_grad);
    NodeRef make(Tensor value, std::vector<NodeRef> inputs, std::function<void(Node&)> backprop);

    // Seed d(root.value[seed_index]) = 1 and sweep. Gradients accumulate in
    // each node's grad tensor; call once per tape.
    void backward(const NodeRef& root, std::size_t seed_index);

    std::size_t node_count() const { return nodes_.size(); }

private:
    std::vector<NodeRef> nodes_;
};

// --- elementwise / shape ---
NodeRef add(Tape& t, const NodeRef& a, const NodeRef& b);
NodeRef mul(Tape& t, const NodeRef& a, const NodeRef& b);
NodeRef scale(Tape& t, const NodeRef& a, double s);
NodeRef gelu(Tape& t, const NodeRef& a); // exact erf form
NodeRef reshape(Tape& t, const NodeRef& a, std::vector<std::size_t> shape);

// --- dense layers ---
// x:(N,Din), w:(Dout,Din), b:(Dout) -> (N,Dout)
NodeRef affine(Tape& t, const NodeRef& x, const NodeRef& w, const NodeRef& b);
// x:(Din) -> (Dout)
NodeRef affine_vec(Tape& t, const NodeRef& x, const NodeRef& w, const NodeRef& b);

// --- conv / pooling ---
// x:(C,H,W), w:(F,C,kh,kw), b:(F); zero padding
NodeRef conv2d(Tape& t, const NodeRef& x, const NodeRef& w, const NodeRef& b, std::size_t stride,
               std::size_t pad);
NodeRef global_avg_pool(Tape& t, const NodeRef& x); // (C,H,W) -> (C)

// --- transformer pieces ---
NodeRef layer_norm(Tape& t, const NodeRef& x, const NodeRef& gamma, const NodeRef& beta,
                   double eps = 1e-5); // rows of (T,D)
NodeRef split_heads(Tape& t, const NodeRef& x, std::size_t heads);  // (T,D)->(H,T,Dh)
NodeRef merge_heads(Tape& t, const NodeRef& x);                     // (H,T,Dh)->(T,D)
NodeRef scaled_qk(Tape& t, const NodeRef& q, const NodeRef& k);     // -> (H,T,T), 1/sqrt(Dh)
NodeRef softmax_lastdim(Tape& t, const NodeRef& x);                 // rows of last dim
NodeRef attn_apply(Tape& t, const NodeRef& a, const NodeRef& v);    // (H,T,T)x(H,T,Dh)
NodeRef concat_rows(Tape& t, const NodeRef& a, const NodeRef& b);   // (Ta,D)+(Tb,D)
NodeRef slice_row(Tape& t, const NodeRef& x, std::size_t row);      // (T,D)->(D)

// --- training ---
// scores:(K) -> scalar {1} cross-entropy against label
NodeRef cross_entropy(Tape& t, const NodeRef& scores, std::size_t label);

} // namespace dix::graph
