#pragma once

#include <cstdint>
#include <iosfwd>

#include "refnet/rng.hpp"
#include "refnet/tensor.hpp"

namespace refnet::nn {

/// Registry of trainable leaves. Registration order is the serialization
/// order, so checkpoints are stable for a fixed architecture.
class ParamStore {
public:
    Tensor create(const std::string& name, const Shape& shape, std::vector<Scalar> init);
    std::vector<Tensor>& tensors() { return params_; }
    const std::vector<Tensor>& tensors() const { return params_; }
    const std::vector<std::string>& names() const { return names_; }

    void set_requires_grad(bool v);
    std::size_t parameter_count() const;
    /// FNV-1a over the raw bytes of every parameter, in registration order.
    std::uint64_t checksum() const;

    void save(std::ostream& out) const;
    void load(std::istream& in);

private:
    std::vector<Tensor> params_;
    std::vector<std::string> names_;
};

/// Adam with per-parameter state. Parameters absent from the gradient map
/// are skipped (no state decay), matching the usual framework behavior.
class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& store, const GradMap& grads);

    double learning_rate() const { return lr_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }

    /// Serialize Adam state in the store's registration order.
    void save(std::ostream& out, const ParamStore& store) const;
    void load(std::istream& in, const ParamStore& store);

private:
    struct State {
        std::vector<Scalar> m, v;
        std::int64_t t = 0;
    };
    double lr_, beta1_, beta2_, eps_;
    std::unordered_map<Node*, State> state_;
};

std::vector<nn::Scalar> kaiming_normal(Rng& rng, int fan_in, std::size_t count);

struct Conv2dLayer {
    Tensor w, b;
    int stride = 1, pad = 1;

    static Conv2dLayer make(ParamStore& store, const std::string& name, int in_ch, int out_ch,
                            int k, int stride, int pad, Rng& rng);
    Tensor operator()(const Tensor& x) const { return conv2d_bias(x, w, b, stride, pad); }
};

struct GroupNormLayer {
    Tensor gamma, beta;
    int groups = 8;
    Scalar eps = 1e-5;

    static GroupNormLayer make(ParamStore& store, const std::string& name, int channels,
                               int groups);
    Tensor operator()(const Tensor& x) const;
};

struct LinearLayer {
    Tensor w, b; // w: [out, in]

    static LinearLayer make(ParamStore& store, const std::string& name, int in_dim, int out_dim,
                            Rng& rng);
    Tensor operator()(const Tensor& x) const; // [N,in] -> [N,out]
};

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

} // namespace refnet::nn
