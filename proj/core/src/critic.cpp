#include "refnet/critic.hpp"

namespace refnet {

using nn::Tensor;

Critic::Critic(const CriticConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.num_layers < 1) throw std::invalid_argument("Critic: num_layers must be >= 1");
    Rng rng(seed);
    int in_ch = cfg.in_channels;
    for (int i = 0; i < cfg.num_layers; ++i) {
        const int out_ch = static_cast<int>(
            std::min<long long>(static_cast<long long>(cfg.base_width) << i, cfg.max_width));
        convs_.push_back(nn::Conv2dLayer::make(params_, "conv" + std::to_string(i), in_ch, out_ch,
                                               4, 2, 1, rng));
        in_ch = out_ch;
    }
    head_ = nn::LinearLayer::make(params_, "head", in_ch, 1, rng);
}

Tensor Critic::score(const Tensor& triplet) const {
    const auto& s = triplet.shape();
    if (s.size() != 4 || s[1] != cfg_.in_channels)
        throw std::invalid_argument("Critic::score: channel mismatch, expected " +
                                    std::to_string(cfg_.in_channels) + " got " +
                                    (s.size() == 4 ? std::to_string(s[1]) : std::string("rank!=4")));
    Tensor f = triplet;
    for (const auto& conv : convs_) f = nn::leaky_relu(conv(f), cfg_.leaky_slope);
    return head_(nn::global_avg_pool(f));
}

void Critic::zero_head() {
    std::fill(head_.w.data(), head_.w.data() + head_.w.numel(), 0.0);
    std::fill(head_.b.data(), head_.b.data() + head_.b.numel(), 0.0);
}

} // namespace refnet
