#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "refnet/affine.hpp"

namespace refnet::nn {

using Shape = std::vector<int>;
using Scalar = double;

inline int shape_numel(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

class Tensor;
using BackwardFn = std::function<std::vector<Tensor>(const Tensor&)>;

/// One graph node: owns the value buffer and, while a forward graph is being
/// recorded, the edges needed to run the chain rule. Backward functions are
/// written in terms of tensor ops, so gradients can themselves carry a graph
/// (create_graph), which is what the gradient penalty's double backward uses.
struct Node {
    Shape shape;
    std::vector<Scalar> data;
    bool requires_grad = false; // leaf flag
    bool needs_grad = false;    // leaf flag or any ancestor requires grad
    std::vector<Tensor> parents;
    BackwardFn backward;
    const char* op = "leaf";
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape& s) { return full(s, 0.f); }
    static Tensor full(const Shape& s, Scalar v);
    static Tensor from_data(const Shape& s, std::vector<Scalar> data);
    static Tensor leaf(const Shape& s, std::vector<Scalar> data, bool requires_grad);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int numel() const { return static_cast<int>(node_->data.size()); }
    Scalar* data() { return node_->data.data(); }
    const Scalar* data() const { return node_->data.data(); }
    const std::vector<Scalar>& vec() const { return node_->data; }
    Scalar item() const {
        if (numel() != 1) throw std::logic_error("Tensor::item: not a scalar");
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) {
        node_->requires_grad = v;
        node_->needs_grad = v || !node_->parents.empty();
    }
    bool needs_grad() const { return node_ && node_->needs_grad; }

    /// Same data, detached from the graph.
    Tensor detach() const { return from_data(node_->shape, node_->data); }

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Gradient recording mode (thread-local). Ops record edges only while
/// enabled; backward() re-enables it when create_graph is requested.
bool grad_enabled();
class GradMode {
public:
    explicit GradMode(bool enable);
    ~GradMode();
    GradMode(const GradMode&) = delete;

private:
    bool prev_;
};

/// Gradients keyed by node. Owned by the backward call, not the nodes, so
/// graphs never form reference cycles.
class GradMap {
public:
    Tensor at(const Tensor& t) const {
        auto it = map_.find(t.node());
        if (it == map_.end()) throw std::logic_error("GradMap: no gradient for tensor");
        return it->second;
    }
    bool contains(const Tensor& t) const { return map_.count(t.node()) > 0; }
    std::unordered_map<Node*, Tensor>& raw() { return map_; }

private:
    std::unordered_map<Node*, Tensor> map_;
};

/// Reverse-mode sweep from a scalar root. With create_graph the returned
/// gradients are themselves differentiable.
GradMap backward(const Tensor& root, bool create_graph = false);

/// Op constructor used by all primitives.
Tensor make_op(Shape shape, std::vector<Scalar> data, std::vector<Tensor> parents,
               BackwardFn bw, const char* op);

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, Scalar v);
Tensor mul_scalar(const Tensor& a, Scalar v);
Tensor square(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor sqrt_op(const Tensor& a, Scalar eps = 0.0);  // sqrt(x + eps)
Tensor rsqrt_op(const Tensor& a, Scalar eps = 0.0); // 1/sqrt(x + eps)
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Scalar slope);
Tensor sigmoid(const Tensor& a);

// ---- reductions and broadcasts ----
Tensor sum(const Tensor& a);                                  // -> [1]
Tensor mean(const Tensor& a);                                 // -> [1]
Tensor broadcast_scalar(const Tensor& s, const Shape& shape); // [1] -> shape
Tensor sum_per_sample(const Tensor& a);                       // [N,...] -> [N]
Tensor broadcast_per_sample(const Tensor& v, const Shape& shape); // [N] -> [N,...]
Tensor global_avg_pool(const Tensor& x);                      // [N,C,H,W] -> [N,C]
Tensor spatial_sum(const Tensor& x);                          // [N,C,H,W] -> [N,C]
Tensor broadcast_hw(const Tensor& v, int h, int w);           // [N,C] -> [N,C,H,W]
Tensor channel_sum(const Tensor& x);                          // [N,C,...] -> [C]
Tensor channel_broadcast(const Tensor& c, const Shape& shape); // [C] -> [N,C,...]
Tensor add_channel_bias(const Tensor& x, const Tensor& b);    // b: [C], x: [N,C,...]
Tensor channel_scale(const Tensor& x, const Tensor& s);       // s: [C]
Tensor group_reduce_mean(const Tensor& x, int groups);        // [N,C,H,W] -> [N,G]
Tensor group_broadcast(const Tensor& v, const Shape& xshape, int groups);

// ---- shape / linear algebra ----
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int c0, int c1);
Tensor slice_batch(const Tensor& x, int i0, int i1); // contiguous range over dim 0
Tensor transpose2d(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b); // [A,K] x [K,B]
Tensor outer_add(const Tensor& u, const Tensor& v); // [N],[M] -> [N,M], u_i + v_j

/// Fused group normalization (per-sample statistics). First-order only:
/// the backward is hand-derived and does not support create_graph.
Tensor group_norm_op(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                     Scalar eps);

// ---- convolution triangle (all three mutually define their backwards) ----
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
/// conv2d with the channel bias fused into the output pass.
Tensor conv2d_bias(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, int stride, int pad,
                         int in_h, int in_w);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, int stride, int pad,
                          int kh, int kw);

// ---- resampling ----
Tensor upsample_nearest2(const Tensor& x);
Tensor sumpool2(const Tensor& x);
/// Differentiable inverse-warp of a [N,C,H,W] tensor by an affine transform
/// (same transform for the whole batch); matches apply_affine(..., Bilinear).
Tensor warp_bilinear(const Tensor& x, const AffineTransform& A);

} // namespace refnet::nn
