#pragma once

#include "refnet/layers.hpp"
#include "refnet/tensor.hpp"

namespace refnet {

struct CriticConfig {
    int in_channels = 7; // image (3) + mask (1) + masked image (3)
    int base_width = 16;
    int num_layers = 4;
    int max_width = 256;
    double leaky_slope = 0.2;

    bool operator==(const CriticConfig&) const = default;
};

/// Wasserstein-style boundary critic: strided convolutions with leaky ReLU,
/// no normalization (the gradient penalty is the Lipschitz mechanism),
/// global average pooling and a linear head to one unconstrained score.
class Critic {
public:
    Critic(const CriticConfig& cfg, std::uint64_t seed);

    /// [N, in_channels, H, W] -> [N, 1] scores.
    nn::Tensor score(const nn::Tensor& triplet) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const CriticConfig& config() const { return cfg_; }

    /// Test hook: zero the final layer so every score is exactly 0.
    void zero_head();

private:
    CriticConfig cfg_;
    nn::ParamStore params_;
    std::vector<nn::Conv2dLayer> convs_;
    nn::LinearLayer head_;
};

} // namespace refnet
