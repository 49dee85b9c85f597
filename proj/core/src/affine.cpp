#include "refnet/affine.hpp"

#include <cmath>
#include <stdexcept>

namespace refnet {
namespace {

constexpr double kDetEps = 1e-6;
constexpr double kPi = 3.14159265358979323846;

struct SrcCoord {
    double x, y;
};

// Map an output pixel back to its source location.
inline SrcCoord source_of(const AffineTransform& inv, double cx, double cy, int x, int y) {
    const double u = x - cx, v = y - cy;
    return {inv.m[0] * u + inv.m[1] * v + inv.m[2] + cx,
            inv.m[3] * u + inv.m[4] * v + inv.m[5] + cy};
}

template <typename Read, typename Write>
void warp(int height, int width, const AffineTransform& A, Interp mode, Read read, Write write) {
    if (!A.invertible()) throw std::invalid_argument("apply_affine: singular transform");
    if (A.is_identity()) {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) write(y, x, read(y, x));
        return;
    }
    const AffineTransform inv = A.inverse();
    const double cx = (width - 1) * 0.5, cy = (height - 1) * 0.5;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const SrcCoord s = source_of(inv, cx, cy, x, y);
            if (mode == Interp::Nearest) {
                const int sx = static_cast<int>(std::lround(s.x));
                const int sy = static_cast<int>(std::lround(s.y));
                const bool in = sx >= 0 && sx < width && sy >= 0 && sy < height;
                write(y, x, in ? read(sy, sx) : 0.f);
            } else {
                const int x0 = static_cast<int>(std::floor(s.x));
                const int y0 = static_cast<int>(std::floor(s.y));
                const float wx = static_cast<float>(s.x - x0);
                const float wy = static_cast<float>(s.y - y0);
                auto sample = [&](int yy, int xx) -> float {
                    return (xx >= 0 && xx < width && yy >= 0 && yy < height) ? read(yy, xx) : 0.f;
                };
                const float v = (1 - wx) * (1 - wy) * sample(y0, x0) +
                                wx * (1 - wy) * sample(y0, x0 + 1) +
                                (1 - wx) * wy * sample(y0 + 1, x0) +
                                wx * wy * sample(y0 + 1, x0 + 1);
                write(y, x, v);
            }
        }
    }
}

} // namespace

AffineTransform AffineTransform::from_params(double rotation_deg, double scale,
                                             double tx_frac, double ty_frac, bool hflip,
                                             int height, int width) {
    const double th = rotation_deg * kPi / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    const double fx = hflip ? -1.0 : 1.0;
    AffineTransform A;
    // R(th) * S(scale) * F(hflip)
    A.m = {c * scale * fx, -s * scale, tx_frac * width,
           s * scale * fx, c * scale, ty_frac * height};
    A.rotation_deg = rotation_deg;
    A.scale = scale;
    A.translate_x_frac = tx_frac;
    A.translate_y_frac = ty_frac;
    A.hflip = hflip;
    if (!A.invertible()) throw std::invalid_argument("AffineTransform: singular parameters");
    return A;
}

bool AffineTransform::invertible() const { return std::abs(det2x2()) > kDetEps; }

bool AffineTransform::is_identity() const {
    return m[0] == 1 && m[1] == 0 && m[2] == 0 && m[3] == 0 && m[4] == 1 && m[5] == 0;
}

AffineTransform AffineTransform::inverse() const {
    if (!invertible()) throw std::invalid_argument("AffineTransform::inverse: singular");
    const double d = det2x2();
    AffineTransform inv;
    inv.m[0] = m[4] / d;
    inv.m[1] = -m[1] / d;
    inv.m[3] = -m[3] / d;
    inv.m[4] = m[0] / d;
    inv.m[2] = -(inv.m[0] * m[2] + inv.m[1] * m[5]);
    inv.m[5] = -(inv.m[3] * m[2] + inv.m[4] * m[5]);
    return inv;
}

AffineTransform sample_affine(Rng& rng, const AffineRanges& r, int height, int width) {
    const double rot = rng.uniform(-r.max_rotation_deg, r.max_rotation_deg);
    const double scale = rng.uniform(1.0 - r.max_scale_delta, 1.0 + r.max_scale_delta);
    const double tx = rng.uniform(-r.max_translation_frac, r.max_translation_frac);
    const double ty = rng.uniform(-r.max_translation_frac, r.max_translation_frac);
    const bool flip = rng.bernoulli(r.flip_prob);
    return AffineTransform::from_params(rot, scale, tx, ty, flip, height, width);
}

Image apply_affine(const Image& img, const AffineTransform& A, Interp mode) {
    Image out(img.height, img.width, img.channels);
    for (int c = 0; c < img.channels; ++c)
        warp(
            img.height, img.width, A, mode,
            [&](int y, int x) { return img.at(c, y, x); },
            [&](int y, int x, float v) { out.at(c, y, x) = v; });
    return out;
}

SoftMask apply_affine(const SoftMask& m, const AffineTransform& A, Interp mode) {
    SoftMask out(m.height, m.width);
    warp(
        m.height, m.width, A, mode, [&](int y, int x) { return m.at(y, x); },
        [&](int y, int x, float v) { out.at(y, x) = v; });
    return out;
}

BinaryMask apply_affine(const BinaryMask& m, const AffineTransform& A) {
    BinaryMask out(m.height, m.width);
    warp(
        m.height, m.width, A, Interp::Nearest,
        [&](int y, int x) { return static_cast<float>(m.at(y, x)); },
        [&](int y, int x, float v) { out.at(y, x) = v >= 0.5f ? 1 : 0; });
    return out;
}

} // namespace refnet
