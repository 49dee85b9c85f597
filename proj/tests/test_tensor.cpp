#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "refnet/layers.hpp"
#include "refnet/rng.hpp"
#include "refnet/tensor.hpp"

using namespace refnet;
using nn::Tensor;

namespace {

Tensor random_leaf(Rng& rng, const nn::Shape& shape, double scale = 1.0, double offset = 0.0) {
    std::vector<double> v(nn::shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0) * scale + offset;
    return Tensor::leaf(shape, std::move(v), true);
}

// Central-difference check of d f / d leaf for every element of every leaf.
double max_grad_error(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                      double step = 1e-5) {
    const Tensor out = f();
    nn::GradMap grads = nn::backward(out);
    double worst = 0.0;
    for (auto& leaf : leaves) {
        const Tensor g = grads.at(leaf);
        for (int i = 0; i < leaf.numel(); ++i) {
            const double saved = leaf.data()[i];
            leaf.data()[i] = saved + step;
            const double fp = f().item();
            leaf.data()[i] = saved - step;
            const double fm = f().item();
            leaf.data()[i] = saved;
            const double fd = (fp - fm) / (2 * step);
            const double scale = std::max({std::abs(fd), std::abs(g.data()[i]), 1.0});
            worst = std::max(worst, std::abs(fd - g.data()[i]) / scale);
        }
    }
    return worst;
}

} // namespace

TEST_CASE("elementwise chain gradients") {
    Rng rng(1);
    Tensor a = random_leaf(rng, {2, 3}, 0.8);
    Tensor b = random_leaf(rng, {2, 3}, 0.8, 1.5); // keep positive for sqrt/reciprocal
    auto f = [&] {
        Tensor t = nn::mul(nn::sigmoid(a), nn::exp_op(nn::mul_scalar(a, 0.5)));
        t = nn::add(t, nn::reciprocal(b));
        t = nn::sub(t, nn::sqrt_op(b, 0.1));
        t = nn::add(t, nn::rsqrt_op(b, 0.2));
        t = nn::add(t, nn::square(nn::add_scalar(a, 0.3)));
        return nn::mean(t);
    };
    CHECK(max_grad_error(f, {a, b}) < 1e-7);
}

TEST_CASE("relu-family gradients away from the kink") {
    Rng rng(2);
    Tensor a = random_leaf(rng, {3, 4});
    for (auto& v : const_cast<std::vector<double>&>(a.vec()))
        if (std::abs(v) < 0.05) v = 0.1; // keep clear of the nondifferentiable point
    auto f = [&] {
        return nn::mean(nn::add(nn::relu(a), nn::leaky_relu(nn::mul_scalar(a, -1.0), 0.2)));
    };
    CHECK(max_grad_error(f, {a}) < 1e-8);
}

TEST_CASE("reduction and broadcast gradients") {
    Rng rng(3);
    Tensor x = random_leaf(rng, {2, 4, 4, 6});
    Tensor v = random_leaf(rng, {2, 4});
    Tensor c = random_leaf(rng, {4});
    auto f = [&] {
        Tensor t = nn::mul(x, nn::broadcast_hw(v, 4, 6));
        t = nn::add_channel_bias(t, c);
        t = nn::channel_scale(t, c);
        Tensor s = nn::sum_per_sample(nn::square(t));
        Tensor g = nn::group_reduce_mean(t, 2);
        Tensor gb = nn::group_broadcast(g, {2, 4, 4, 6}, 2);
        return nn::add(nn::mean(s), nn::mean(nn::mul(gb, t)));
    };
    CHECK(max_grad_error(f, {x, v, c}) < 1e-7);
}

TEST_CASE("matmul outer_add transpose gradients") {
    Rng rng(4);
    Tensor a = random_leaf(rng, {3, 5});
    Tensor b = random_leaf(rng, {5, 2});
    Tensor u = random_leaf(rng, {3});
    Tensor w = random_leaf(rng, {4});
    auto f = [&] {
        Tensor m = nn::matmul(a, b);
        Tensor t = nn::matmul(nn::transpose2d(m), m); // [2,2]
        Tensor o = nn::outer_add(u, w);
        return nn::add(nn::mean(nn::square(t)), nn::mean(nn::square(o)));
    };
    CHECK(max_grad_error(f, {a, b, u, w}) < 1e-7);
}

TEST_CASE("concat and slice gradients") {
    Rng rng(5);
    Tensor a = random_leaf(rng, {2, 2, 3, 3});
    Tensor b = random_leaf(rng, {2, 3, 3, 3});
    auto f = [&] {
        Tensor t = nn::concat_channels(a, b);
        Tensor s = nn::slice_channels(t, 1, 4);
        return nn::mean(nn::square(s));
    };
    CHECK(max_grad_error(f, {a, b}) < 1e-8);
}

TEST_CASE("conv2d triangle gradients across stride and padding") {
    Rng rng(6);
    struct Cfg {
        int k, stride, pad;
    };
    for (const Cfg cfg : {Cfg{3, 1, 1}, Cfg{4, 2, 1}, Cfg{1, 1, 0}, Cfg{3, 2, 0}}) {
        Tensor x = random_leaf(rng, {2, 3, 7, 8});
        Tensor w = random_leaf(rng, {4, 3, cfg.k, cfg.k}, 0.5);
        auto f = [&] { return nn::mean(nn::square(nn::conv2d(x, w, cfg.stride, cfg.pad))); };
        CHECK(max_grad_error(f, {x, w}) < 1e-7);
    }
}

TEST_CASE("conv2d_input_grad and weight_grad as differentiable primitives") {
    Rng rng(7);
    Tensor gy = random_leaf(rng, {2, 4, 4, 4});
    Tensor w = random_leaf(rng, {4, 3, 3, 3}, 0.5);
    auto f1 = [&] {
        return nn::mean(nn::square(nn::conv2d_input_grad(gy, w, 2, 1, 8, 8)));
    };
    CHECK(max_grad_error(f1, {gy, w}) < 1e-7);

    Tensor x = random_leaf(rng, {2, 3, 8, 8});
    auto f2 = [&] {
        return nn::mean(nn::square(nn::conv2d_weight_grad(x, gy, 2, 1, 3, 3)));
    };
    CHECK(max_grad_error(f2, {x, gy}) < 1e-7);
}

TEST_CASE("upsample and sumpool are adjoint and differentiable") {
    Rng rng(8);
    Tensor x = random_leaf(rng, {1, 2, 3, 4});
    Tensor y = random_leaf(rng, {1, 2, 6, 8});
    // <up(x), y> == <x, pool(y)>
    const double lhs = nn::sum(nn::mul(nn::upsample_nearest2(x), y)).item();
    const double rhs = nn::sum(nn::mul(x, nn::sumpool2(y))).item();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    auto f = [&] { return nn::mean(nn::square(nn::sumpool2(nn::upsample_nearest2(x)))); };
    CHECK(max_grad_error(f, {x}) < 1e-8);
}

TEST_CASE("warp_bilinear gradient and adjoint identity") {
    Rng rng(9);
    Tensor x = random_leaf(rng, {1, 1, 8, 8});
    const AffineTransform A = AffineTransform::from_params(17, 1.05, 0.04, -0.06, false, 8, 8);
    auto f = [&] { return nn::mean(nn::square(nn::warp_bilinear(x, A))); };
    CHECK(max_grad_error(f, {x}) < 1e-8);

    // identity warp is exact
    Tensor id = nn::warp_bilinear(x, AffineTransform::identity());
    CHECK(id.vec() == x.vec());
}

TEST_CASE("group norm layer gradient") {
    Rng rng(10);
    nn::ParamStore store;
    nn::GroupNormLayer gn = nn::GroupNormLayer::make(store, "gn", 4, 2);
    Tensor x = random_leaf(rng, {2, 4, 3, 3});
    auto f = [&] { return nn::mean(nn::square(gn(x))); };
    CHECK(max_grad_error(f, {x, gn.gamma, gn.beta}) < 1e-6);
}

TEST_CASE("double backward through a conv score (gradient-penalty pattern)") {
    Rng rng(11);
    Tensor x = random_leaf(rng, {2, 2, 4, 4});
    Tensor w1 = random_leaf(rng, {3, 2, 3, 3}, 0.6);
    Tensor w2 = random_leaf(rng, {1, 3, 1, 1}, 0.6);

    // gp(theta) = mean over samples of (|grad_x D(x)|_2 - 1)^2
    auto gp_value = [&]() -> Tensor {
        Tensor h = nn::leaky_relu(nn::conv2d(x, w1, 1, 1), 0.2);
        Tensor s = nn::sum(nn::conv2d(h, w2, 1, 0));
        nn::GradMap inner = nn::backward(s, /*create_graph=*/true);
        Tensor gx = inner.at(x);
        Tensor norm = nn::sqrt_op(nn::sum_per_sample(nn::square(gx)), 1e-24);
        return nn::mean(nn::square(nn::add_scalar(norm, -1.0)));
    };
    CHECK(max_grad_error(gp_value, {w1, w2}, 1e-5) < 1e-6);
}

TEST_CASE("detach and requires_grad control the graph") {
    Rng rng(12);
    Tensor a = random_leaf(rng, {3});
    Tensor b = random_leaf(rng, {3});
    Tensor out = nn::mean(nn::mul(a.detach(), b));
    nn::GradMap grads = nn::backward(out);
    CHECK_FALSE(grads.contains(a));
    CHECK(grads.contains(b));

    b.set_requires_grad(false);
    Tensor out2 = nn::mean(nn::mul(a, b));
    nn::GradMap g2 = nn::backward(out2);
    CHECK(g2.contains(a));
    CHECK_FALSE(g2.contains(b));
    b.set_requires_grad(true);
}

TEST_CASE("ops are deterministic") {
    Rng rng(13);
    Tensor x = random_leaf(rng, {2, 3, 8, 8});
    Tensor w = random_leaf(rng, {5, 3, 3, 3});
    const Tensor y1 = nn::conv2d(x, w, 2, 1);
    const Tensor y2 = nn::conv2d(x, w, 2, 1);
    CHECK(y1.vec() == y2.vec());
}

TEST_CASE("backward accumulates over shared subexpressions") {
    // f = sum(x*x + x) -> df/dx = 2x + 1
    Tensor x = Tensor::leaf({3}, {1.0, -2.0, 0.5}, true);
    Tensor out = nn::sum(nn::add(nn::mul(x, x), x));
    nn::GradMap grads = nn::backward(out);
    const Tensor g = grads.at(x);
    CHECK(g.data()[0] == doctest::Approx(3.0));
    CHECK(g.data()[1] == doctest::Approx(-3.0));
    CHECK(g.data()[2] == doctest::Approx(2.0));
}
