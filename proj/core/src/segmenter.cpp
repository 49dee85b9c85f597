#include "refnet/segmenter.hpp"

namespace refnet {

using nn::Tensor;

Tensor to_tensor(const std::vector<Image>& batch) {
    if (batch.empty()) throw std::invalid_argument("to_tensor: empty batch");
    const int n = static_cast<int>(batch.size());
    const int c = batch[0].channels, h = batch[0].height, w = batch[0].width;
    std::vector<nn::Scalar> data(static_cast<std::size_t>(n) * c * h * w);
    for (int i = 0; i < n; ++i) {
        if (batch[i].channels != c || batch[i].height != h || batch[i].width != w)
            throw std::invalid_argument("to_tensor: ragged batch");
        std::copy(batch[i].data.begin(), batch[i].data.end(),
                  data.begin() + static_cast<std::size_t>(i) * c * h * w);
    }
    return Tensor::from_data({n, c, h, w}, std::move(data));
}

Tensor to_tensor(const std::vector<SoftMask>& batch) {
    if (batch.empty()) throw std::invalid_argument("to_tensor: empty batch");
    const int n = static_cast<int>(batch.size());
    const int h = batch[0].height, w = batch[0].width;
    std::vector<nn::Scalar> data(static_cast<std::size_t>(n) * h * w);
    for (int i = 0; i < n; ++i)
        std::copy(batch[i].grid.begin(), batch[i].grid.end(),
                  data.begin() + static_cast<std::size_t>(i) * h * w);
    return Tensor::from_data({n, 1, h, w}, std::move(data));
}

Tensor to_tensor(const std::vector<BinaryMask>& batch) {
    if (batch.empty()) throw std::invalid_argument("to_tensor: empty batch");
    const int n = static_cast<int>(batch.size());
    const int h = batch[0].height, w = batch[0].width;
    std::vector<nn::Scalar> data(static_cast<std::size_t>(n) * h * w);
    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < batch[i].grid.size(); ++j)
            data[static_cast<std::size_t>(i) * h * w + j] = batch[i].grid[j];
    return Tensor::from_data({n, 1, h, w}, std::move(data));
}

SoftMask soft_mask_from_tensor(const Tensor& t, int sample) {
    const auto& s = t.shape();
    if (s.size() != 4 || s[1] != 1) throw std::invalid_argument("soft_mask_from_tensor: need [N,1,H,W]");
    SoftMask m(s[2], s[3]);
    const nn::Scalar* src = t.data() + static_cast<std::size_t>(sample) * s[2] * s[3];
    for (std::size_t i = 0; i < m.grid.size(); ++i) m.grid[i] = static_cast<float>(src[i]);
    return m;
}

int ArchConfig::width_at(int level) const {
    const long long wide = static_cast<long long>(base_width) << level;
    return static_cast<int>(std::min<long long>(wide, max_width));
}

Segmenter::Segmenter(const ArchConfig& arch, std::uint64_t seed) : arch_(arch) {
    if (arch.depth < 1) throw std::invalid_argument("Segmenter: depth must be >= 1");
    if (arch.base_width < 1) throw std::invalid_argument("Segmenter: base_width must be >= 1");
    Rng rng(seed);
    stem_ = nn::Conv2dLayer::make(params_, "stem", arch.in_channels, arch.width_at(0), 3, 1, 1, rng);
    stem_gn_ = nn::GroupNormLayer::make(params_, "stem_gn", arch.width_at(0), arch.norm_groups);
    for (int i = 0; i < arch.depth; ++i) {
        EncLevel lvl;
        const int win = arch.width_at(i), wout = arch.width_at(i + 1);
        const std::string base = "enc" + std::to_string(i);
        lvl.down = nn::Conv2dLayer::make(params_, base + ".down", win, wout, 3, 2, 1, rng);
        lvl.gn_down = nn::GroupNormLayer::make(params_, base + ".gn_down", wout, arch.norm_groups);
        lvl.refine = nn::Conv2dLayer::make(params_, base + ".refine", wout, wout, 3, 1, 1, rng);
        lvl.gn_refine = nn::GroupNormLayer::make(params_, base + ".gn_refine", wout, arch.norm_groups);
        enc_.push_back(std::move(lvl));
    }
    const int bw = arch.width_at(arch.depth);
    fuse_ = nn::Conv2dLayer::make(params_, "fuse", 2 * bw, bw, 3, 1, 1, rng);
    fuse_gn_ = nn::GroupNormLayer::make(params_, "fuse_gn", bw, arch.norm_groups);
    for (int i = arch.depth; i >= 1; --i) {
        DecLevel lvl;
        const int win = arch.width_at(i) + arch.width_at(i - 1); // upsampled + skip
        const int wout = arch.width_at(i - 1);
        const std::string base = "dec" + std::to_string(i);
        lvl.conv = nn::Conv2dLayer::make(params_, base + ".conv", win, wout, 3, 1, 1, rng);
        lvl.gn = nn::GroupNormLayer::make(params_, base + ".gn", wout, arch.norm_groups);
        dec_.push_back(std::move(lvl));
    }
    head_ = nn::Conv2dLayer::make(params_, "head", arch.width_at(0), 1, 3, 1, 1, rng);
}

Segmenter::EncoderTrace Segmenter::run_encoder(const Tensor& x) const {
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != arch_.in_channels)
        throw std::invalid_argument("Segmenter: bad input channels");
    if (s[2] % arch_.stride() != 0 || s[3] % arch_.stride() != 0)
        throw std::invalid_argument("Segmenter: spatial dims must divide by " +
                                    std::to_string(arch_.stride()));
    EncoderTrace tr;
    Tensor f = relu(stem_gn_(stem_(x)));
    tr.skips.push_back(f);
    for (const auto& lvl : enc_) {
        f = relu(lvl.gn_down(lvl.down(f)));
        f = relu(lvl.gn_refine(lvl.refine(f)));
        tr.skips.push_back(f);
    }
    tr.bottleneck = f;
    return tr;
}

Tensor Segmenter::encode(const Tensor& x) const { return run_encoder(x).bottleneck; }

Tensor Segmenter::ref_embedding(const Tensor& masked_ref) const {
    return nn::global_avg_pool(encode(masked_ref));
}

Tensor Segmenter::segment(const Tensor& target, const Tensor& masked_ref, bool condition) const {
    if (target.shape() != masked_ref.shape())
        throw std::invalid_argument("Segmenter::segment: branch resolution mismatch");
    const EncoderTrace tr = run_encoder(target);
    const auto& bs = tr.bottleneck.shape();

    Tensor cond;
    if (!condition) {
        cond = Tensor::zeros(bs);
    } else if (arch_.spatial_condition) {
        cond = encode(masked_ref);
    } else {
        cond = nn::broadcast_hw(ref_embedding(masked_ref), bs[2], bs[3]);
    }

    Tensor z = relu(fuse_gn_(fuse_(nn::concat_channels(tr.bottleneck, cond))));
    for (std::size_t i = 0; i < dec_.size(); ++i) {
        z = nn::upsample_nearest2(z);
        const Tensor& skip = tr.skips[dec_.size() - 1 - i];
        z = nn::concat_channels(z, skip);
        z = relu(dec_[i].gn(dec_[i].conv(z)));
    }
    return nn::sigmoid(head_(z));
}

} // namespace refnet
