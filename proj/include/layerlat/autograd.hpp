#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "layerlat/tensor.hpp"

namespace layerlat::ag {

// Minimal reverse-mode tape used only to train the toy denoiser. Not a
// general autodiff system: it supports exactly the ops the U-Net needs.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Tensor& g);
};

class Tape {
public:
    NodePtr leaf(Tensor value, bool requires_grad = false);

    // Conv over (c_in x h x w) with weight (c_out x c_in x k x k); stride 1
    // or 2, symmetric zero padding.
    NodePtr conv2d(NodePtr x, NodePtr w, NodePtr b, int stride, int pad);

    NodePtr group_norm(NodePtr x, NodePtr gamma, NodePtr beta, int groups);
    NodePtr silu(NodePtr x);

    // x: (n x in), w: (in x out), b: (out).
    NodePtr linear(NodePtr x, NodePtr w, NodePtr b);

    NodePtr add(NodePtr a, NodePtr b);
    NodePtr add_channel_bias(NodePtr x, NodePtr bias);  // bias (c) over (c x h x w)
    NodePtr matmul(NodePtr a, NodePtr b);
    NodePtr transpose2d(NodePtr a);
    NodePtr reshape(NodePtr a, std::vector<int> shape);
    NodePtr scale(NodePtr a, float s);
    NodePtr softmax_lastdim(NodePtr a);
    NodePtr nearest_upsample2x(NodePtr x);

    // Mean squared error, returned as a [1] tensor. Gradient flows into
    // pred only.
    NodePtr mse_loss(NodePtr pred, NodePtr target);

    // Seeds d(loss)=1 and walks the tape in reverse creation order.
    void backward(NodePtr loss);

    size_t node_count() const { return order_.size(); }

private:
    NodePtr record(Tensor value, std::vector<NodePtr> inputs, std::function<void(Node&)> fn);

    std::vector<NodePtr> order_;
};

}  // namespace layerlat::ag
