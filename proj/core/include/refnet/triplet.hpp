#pragma once

#include <vector>

#include "refnet/image.hpp"
#include "refnet/rng.hpp"
#include "refnet/tensor.hpp"

namespace refnet {

enum class Side { Outer, Inner };
enum class Provenance { Fake, Real, Pseudo, Interpolated };

/// Critic input: (image, mask, masked image) stacked along channels.
/// masked_image == mask * image holds for every provenance except
/// Interpolated, which is a per-component convex combination.
struct Triplet {
    nn::Tensor image;        // [N,3,H,W]
    nn::Tensor mask;         // [N,1,H,W]
    nn::Tensor masked_image; // [N,3,H,W]
    Side side = Side::Outer;
    Provenance provenance = Provenance::Fake;

    nn::Tensor to_tensor() const; // [N,7,H,W]
    int batch() const { return image.shape().at(0); }
};

/// Outer: (x, m̃, m̃*x). Inner: (x, 1-m̃, (1-m̃)*x). Gradients flow through
/// the soft mask into the segmenter.
Triplet make_fake_triplet(const nn::Tensor& image, const nn::Tensor& soft_mask, Side side);

/// As fake, but the mask must be exactly binary; no gradient path.
Triplet make_real_triplet(const nn::Tensor& image, const nn::Tensor& binary_mask, Side side);

/// Pseudo-triplet dilation radii, scaled linearly with resolution from the
/// reference range [11, 55] at 128 px; never below 1.
struct PseudoRadiusRange {
    int lo = 1, hi = 1;
    static PseudoRadiusRange for_resolution(int height);
    bool contains(int r) const { return r >= lo && r <= hi; }
};

int sample_pseudo_radius(Rng& rng, const PseudoRadiusRange& range);

/// Outer: (x, D_r(m), D_r(m)*x); inner uses the dilated complement. The
/// mask is ground truth from the open-source set; the critic treats the
/// result as fake-class.
Triplet make_pseudo_triplet(const nn::Tensor& image, const std::vector<BinaryMask>& gt_masks,
                            int r, Side side, const PseudoRadiusRange& range);
/// Per-sample radii variant.
Triplet make_pseudo_triplet(const nn::Tensor& image, const std::vector<BinaryMask>& gt_masks,
                            const std::vector<int>& radii, Side side,
                            const PseudoRadiusRange& range);

/// eps * real_endpoint + (1 - eps) * fake_endpoint, per component.
Triplet interpolate_triplets(const Triplet& endpoint_e, const Triplet& endpoint_a, double eps);
/// Same with one eps per sample.
Triplet interpolate_triplets(const Triplet& endpoint_e, const Triplet& endpoint_a,
                             const std::vector<double>& eps);

} // namespace refnet
