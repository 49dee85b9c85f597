#pragma once

#include "refnet/image.hpp"
#include "refnet/layers.hpp"
#include "refnet/tensor.hpp"

namespace refnet {

/// Conversions between host images/masks and network tensors.
nn::Tensor to_tensor(const std::vector<Image>& batch);
nn::Tensor to_tensor(const std::vector<SoftMask>& batch);
nn::Tensor to_tensor(const std::vector<BinaryMask>& batch);
SoftMask soft_mask_from_tensor(const nn::Tensor& t, int sample);

struct ArchConfig {
    int depth = 3;      // number of 2x downsamplings
    int base_width = 16;
    int max_width = 192;
    int norm_groups = 8;
    int in_channels = 3;
    /// Concatenate the full reference feature map at the bottleneck instead
    /// of a pooled-and-broadcast vector.
    bool spatial_condition = false;

    bool operator==(const ArchConfig&) const = default;
    int stride() const { return 1 << depth; }
    int width_at(int level) const; // level 0 = stem
};

/// Two-branch reference segmentation network. One encoder parameter set
/// serves both the target branch and the reference branch; the decoder sees
/// the concatenation of target bottleneck features and the reference
/// embedding, plus skip connections from the target branch only.
class Segmenter {
public:
    Segmenter(const ArchConfig& arch, std::uint64_t seed);

    /// Encoder features of an input batch [N,C,H,W] -> [N,D,H/2^depth,W/2^depth].
    nn::Tensor encode(const nn::Tensor& x) const;

    /// Pooled reference embedding [N,D] of a masked reference batch.
    nn::Tensor ref_embedding(const nn::Tensor& masked_ref) const;

    /// Soft mask prediction [N,1,H,W], every value strictly inside (0,1).
    /// `condition` toggles the reference conditioning (ablation hook); when
    /// off, the reference slot is filled with zeros.
    nn::Tensor segment(const nn::Tensor& target, const nn::Tensor& masked_ref,
                       bool condition = true) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const ArchConfig& arch() const { return arch_; }

private:
    struct EncLevel {
        nn::Conv2dLayer down;
        nn::GroupNormLayer gn_down;
        nn::Conv2dLayer refine;
        nn::GroupNormLayer gn_refine;
    };
    struct DecLevel {
        nn::Conv2dLayer conv;
        nn::GroupNormLayer gn;
    };

    // target-branch encoder trace: bottleneck + per-level skips
    struct EncoderTrace {
        nn::Tensor bottleneck;
        std::vector<nn::Tensor> skips;
    };
    EncoderTrace run_encoder(const nn::Tensor& x) const;

    ArchConfig arch_;
    nn::ParamStore params_;
    nn::Conv2dLayer stem_;
    nn::GroupNormLayer stem_gn_;
    std::vector<EncLevel> enc_;
    nn::Conv2dLayer fuse_;
    nn::GroupNormLayer fuse_gn_;
    std::vector<DecLevel> dec_;
    nn::Conv2dLayer head_;
};

} // namespace refnet
