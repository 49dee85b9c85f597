#include "refnet/triplet.hpp"

#include <cmath>

#include "refnet/morphology.hpp"
#include "refnet/segmenter.hpp"

namespace refnet {

using nn::Tensor;

namespace {

Tensor repeat3(const Tensor& m) {
    return nn::concat_channels(nn::concat_channels(m, m), m);
}

void check_pair(const Tensor& image, const Tensor& mask, const char* op) {
    const auto& si = image.shape();
    const auto& sm = mask.shape();
    if (si.size() != 4 || sm.size() != 4 || si[1] != 3 || sm[1] != 1 || si[0] != sm[0] ||
        si[2] != sm[2] || si[3] != sm[3])
        throw std::invalid_argument(std::string(op) + ": need image [N,3,H,W] and mask [N,1,H,W]");
}

Tensor side_mask(const Tensor& m, Side side) {
    return side == Side::Outer ? m : nn::add_scalar(nn::neg(m), 1.0);
}

} // namespace

Tensor Triplet::to_tensor() const {
    return nn::concat_channels(nn::concat_channels(image, mask), masked_image);
}

Triplet make_fake_triplet(const Tensor& image, const Tensor& soft_mask, Side side) {
    check_pair(image, soft_mask, "make_fake_triplet");
    Triplet t;
    t.image = image;
    t.mask = side_mask(soft_mask, side);
    t.masked_image = nn::mul(repeat3(t.mask), image);
    t.side = side;
    t.provenance = Provenance::Fake;
    return t;
}

Triplet make_real_triplet(const Tensor& image, const Tensor& binary_mask, Side side) {
    check_pair(image, binary_mask, "make_real_triplet");
    for (nn::Scalar v : binary_mask.vec())
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("make_real_triplet: mask is not binary");
    Triplet t;
    t.image = image;
    t.mask = side_mask(binary_mask, side).detach();
    t.masked_image = nn::mul(repeat3(t.mask), image.detach());
    t.side = side;
    t.provenance = Provenance::Real;
    return t;
}

PseudoRadiusRange PseudoRadiusRange::for_resolution(int height) {
    PseudoRadiusRange r;
    r.lo = std::max(1, static_cast<int>(std::lround(11.0 * height / 128.0)));
    r.hi = std::max(r.lo, static_cast<int>(std::lround(55.0 * height / 128.0)));
    return r;
}

int sample_pseudo_radius(Rng& rng, const PseudoRadiusRange& range) {
    return rng.uniform_int(range.lo, range.hi);
}

Triplet make_pseudo_triplet(const Tensor& image, const std::vector<BinaryMask>& gt_masks, int r,
                            Side side, const PseudoRadiusRange& range) {
    return make_pseudo_triplet(image, gt_masks, std::vector<int>(gt_masks.size(), r), side,
                               range);
}

Triplet make_pseudo_triplet(const Tensor& image, const std::vector<BinaryMask>& gt_masks,
                            const std::vector<int>& radii, Side side,
                            const PseudoRadiusRange& range) {
    if (radii.size() != gt_masks.size())
        throw std::invalid_argument("make_pseudo_triplet: radii size mismatch");
    for (int r : radii)
        if (!range.contains(r) && r != 0)
            throw std::invalid_argument("make_pseudo_triplet: radius " + std::to_string(r) +
                                        " outside configured range [" + std::to_string(range.lo) +
                                        ", " + std::to_string(range.hi) + "]");
    std::vector<BinaryMask> dilated;
    dilated.reserve(gt_masks.size());
    for (std::size_t i = 0; i < gt_masks.size(); ++i)
        dilated.push_back(
            dilate(side == Side::Outer ? gt_masks[i] : gt_masks[i].complement(), radii[i]));
    const Tensor mask_t = to_tensor(dilated);
    check_pair(image, mask_t, "make_pseudo_triplet");
    Triplet t;
    t.image = image;
    t.mask = mask_t;
    t.masked_image = nn::mul(repeat3(mask_t), image.detach());
    t.side = side;
    t.provenance = Provenance::Pseudo;
    return t;
}

namespace {

Tensor lerp(const Tensor& e, const Tensor& a, double eps) {
    return nn::add(nn::mul_scalar(e, eps), nn::mul_scalar(a, 1.0 - eps));
}

Tensor lerp(const Tensor& e, const Tensor& a, const std::vector<double>& eps) {
    const Tensor ev = Tensor::from_data({static_cast<int>(eps.size())}, std::vector<nn::Scalar>(eps));
    const Tensor we = nn::broadcast_per_sample(ev, e.shape());
    std::vector<nn::Scalar> om(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) om[i] = 1.0 - eps[i];
    const Tensor wa = nn::broadcast_per_sample(
        Tensor::from_data({static_cast<int>(eps.size())}, std::move(om)), a.shape());
    return nn::add(nn::mul(e, we), nn::mul(a, wa));
}

template <typename Eps>
Triplet interpolate_impl(const Triplet& e, const Triplet& a, const Eps& eps) {
    if (e.side != a.side) throw std::invalid_argument("interpolate_triplets: mixed sides");
    if (e.image.shape() != a.image.shape())
        throw std::invalid_argument("interpolate_triplets: shape mismatch");
    Triplet t;
    t.image = lerp(e.image, a.image, eps);
    t.mask = lerp(e.mask, a.mask, eps);
    t.masked_image = lerp(e.masked_image, a.masked_image, eps);
    t.side = e.side;
    t.provenance = Provenance::Interpolated;
    return t;
}

} // namespace

Triplet interpolate_triplets(const Triplet& endpoint_e, const Triplet& endpoint_a, double eps) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("interpolate_triplets: eps outside [0,1]");
    return interpolate_impl(endpoint_e, endpoint_a, eps);
}

Triplet interpolate_triplets(const Triplet& endpoint_e, const Triplet& endpoint_a,
                             const std::vector<double>& eps) {
    if (static_cast<int>(eps.size()) != endpoint_e.batch())
        throw std::invalid_argument("interpolate_triplets: eps size != batch");
    for (double v : eps)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("interpolate_triplets: eps outside [0,1]");
    return interpolate_impl(endpoint_e, endpoint_a, eps);
}

} // namespace refnet
