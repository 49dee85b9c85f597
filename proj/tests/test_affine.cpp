#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "refnet/affine.hpp"
#include "refnet/rng.hpp"

using namespace refnet;

namespace {

Image random_image(Rng& rng, int h, int w, int c = 3) {
    Image img(h, w, c);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

} // namespace

TEST_CASE("identity transform is bit-exact in both modes") {
    Rng rng(11);
    const Image img = random_image(rng, 12, 17);
    const AffineTransform id = AffineTransform::identity();
    CHECK(apply_affine(img, id, Interp::Bilinear).data == img.data);
    CHECK(apply_affine(img, id, Interp::Nearest).data == img.data);

    SoftMask m(9, 9);
    for (auto& v : m.grid) v = static_cast<float>(rng.uniform());
    CHECK(apply_affine(m, id, Interp::Bilinear).grid == m.grid);
}

TEST_CASE("sample_affine respects ranges and determinism") {
    AffineRanges zero{0, 0, 0, 0};
    Rng rng(5);
    const AffineTransform a = sample_affine(rng, zero, 64, 64);
    CHECK(a.m == std::array<double, 6>{1, 0, 0, 0, 1, 0});

    Rng r1(99), r2(99);
    AffineRanges def;
    for (int i = 0; i < 20; ++i) {
        const AffineTransform t1 = sample_affine(r1, def, 64, 64);
        const AffineTransform t2 = sample_affine(r2, def, 64, 64);
        CHECK(t1.m == t2.m);
        CHECK(t1.hflip == t2.hflip);
    }

    AffineRanges rot{30, 0, 0, 0};
    Rng r3(3);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 10000; ++i) {
        const AffineTransform t = sample_affine(r3, rot, 64, 64);
        lo = std::min(lo, t.rotation_deg);
        hi = std::max(hi, t.rotation_deg);
    }
    CHECK(lo >= -30.0);
    CHECK(hi <= 30.0);
    CHECK(lo < -29.0); // ranges actually exercised
    CHECK(hi > 29.0);
}

TEST_CASE("180 degree rotation is an involution in nearest mode") {
    Rng rng(21);
    const Image img = random_image(rng, 16, 16);
    const AffineTransform rot = AffineTransform::from_params(180, 1, 0, 0, false, 16, 16);
    const Image once = apply_affine(img, rot, Interp::Nearest);
    const Image twice = apply_affine(once, rot, Interp::Nearest);
    CHECK(twice.data == img.data);
}

TEST_CASE("90 degree rotation maps a single pixel to the rotated coordinate") {
    BinaryMask m(8, 8);
    m.at(2, 5) = 1; // (row, col); centered coords u = 1.5, v = -1.5
    const AffineTransform rot = AffineTransform::from_params(90, 1, 0, 0, false, 8, 8);
    const BinaryMask out = apply_affine(m, rot);
    // forward map: (u', v') = (-v, u) = (1.5, 1.5) -> row 5, col 5
    CHECK(out.count() == 1);
    CHECK(out.at(5, 5) == 1);
}

TEST_CASE("horizontal flip is an involution") {
    Rng rng(31);
    const Image img = random_image(rng, 10, 14);
    const AffineTransform flip = AffineTransform::from_params(0, 1, 0, 0, true, 10, 14);
    CHECK(apply_affine(apply_affine(img, flip, Interp::Nearest), flip, Interp::Nearest).data ==
          img.data);
}

TEST_CASE("singular transforms are rejected") {
    CHECK_THROWS_AS(AffineTransform::from_params(0, 0, 0, 0, false, 8, 8), std::invalid_argument);
    AffineTransform bad;
    bad.m = {1e-9, 0, 0, 0, 1e-9, 0};
    Image img(4, 4, 3);
    CHECK_THROWS_AS(apply_affine(img, bad, Interp::Bilinear), std::invalid_argument);
    CHECK_FALSE(bad.invertible());
}

TEST_CASE("mask warps stay binary and out-of-frame fills zero") {
    BinaryMask m(8, 8, 1);
    const AffineTransform shift = AffineTransform::from_params(0, 1, 0.5, 0, false, 8, 8);
    const BinaryMask out = apply_affine(m, shift);
    for (auto v : out.grid) CHECK((v == 0 || v == 1));
    // left half came from outside the frame
    CHECK(out.at(4, 0) == 0);
    CHECK(out.at(4, 7) == 1);
}

TEST_CASE("inverse composes to identity") {
    const AffineTransform t = AffineTransform::from_params(23, 1.1, 0.05, -0.08, true, 32, 32);
    const AffineTransform inv = t.inverse();
    // m2x2 product should be close to I
    const double a = t.m[0] * inv.m[0] + t.m[1] * inv.m[3];
    const double b = t.m[0] * inv.m[1] + t.m[1] * inv.m[4];
    const double c = t.m[3] * inv.m[0] + t.m[4] * inv.m[3];
    const double d = t.m[3] * inv.m[1] + t.m[4] * inv.m[4];
    CHECK(a == doctest::Approx(1).epsilon(1e-12));
    CHECK(b == doctest::Approx(0).epsilon(1e-12));
    CHECK(c == doctest::Approx(0).epsilon(1e-12));
    CHECK(d == doctest::Approx(1).epsilon(1e-12));
}
