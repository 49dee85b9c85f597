#pragma once

#include <array>

#include "refnet/image.hpp"
#include "refnet/rng.hpp"

namespace refnet {

enum class Interp { Bilinear, Nearest };

/// 2x3 affine map acting on pixel coordinates centered on the image
/// (origin at ((w-1)/2, (h-1)/2)). Row-major [a b tx; c d ty], forward
/// direction: p_out = M * p_in + t.
struct AffineTransform {
    std::array<double, 6> m{1, 0, 0, 0, 1, 0};
    // generating parameters, kept for logging/tests
    double rotation_deg = 0;
    double scale = 1;
    double translate_x_frac = 0;
    double translate_y_frac = 0;
    bool hflip = false;

    static AffineTransform identity() { return {}; }

    /// Compose flip -> scale -> rotate -> translate about the image center.
    /// Translation fractions are of image width/height respectively.
    static AffineTransform from_params(double rotation_deg, double scale,
                                       double tx_frac, double ty_frac, bool hflip,
                                       int height, int width);

    double det2x2() const { return m[0] * m[4] - m[1] * m[3]; }
    bool invertible() const;
    AffineTransform inverse() const;
    bool is_identity() const;
};

struct AffineRanges {
    double max_rotation_deg = 30.0;
    double max_scale_delta = 0.2;
    double max_translation_frac = 0.1;
    double flip_prob = 0.5;
};

/// rotation ~ U[-r,r], scale ~ U[1-s,1+s], translation ~ U[-t,t] per axis,
/// flip ~ Bernoulli(p). Deterministic for a fixed rng state.
AffineTransform sample_affine(Rng& rng, const AffineRanges& ranges, int height, int width);

/// Inverse-warp resampling; out-of-frame pixels fill 0. The identity
/// transform is bit-exact for both modes.
Image apply_affine(const Image& img, const AffineTransform& A, Interp mode);
SoftMask apply_affine(const SoftMask& m, const AffineTransform& A, Interp mode);
BinaryMask apply_affine(const BinaryMask& m, const AffineTransform& A); // nearest, stays binary

} // namespace refnet
