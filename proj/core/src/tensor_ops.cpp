#include <cmath>

#include "refnet/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refnet::nn {

namespace {
// parallelize heavy elementwise passes; small tensors stay serial
constexpr std::ptrdiff_t kParThreshold = 1 << 15;
}

#define REFNET_ELEMWISE_FOR(i, n) \
    _Pragma("omp parallel for schedule(static) if (n >= kParThreshold)") \
    for (std::ptrdiff_t i = 0; i < (n); ++i)


namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// dims after the leading batch dim
int per_sample_numel(const Shape& s) {
    int n = 1;
    for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
    return n;
}

struct Dims4 {
    int n, c, h, w;
};
Dims4 dims4(const Tensor& t, const char* op) {
    if (t.shape().size() != 4) throw std::invalid_argument(std::string(op) + ": rank-4 tensor required");
    const auto& s = t.shape();
    return {s[0], s[1], s[2], s[3]};
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<Scalar> out(a.vec());
    const Scalar* pb = b.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
    REFNET_ELEMWISE_FOR(i, n) out[static_cast<std::size_t>(i)] += pb[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [](const Tensor& g) { return std::vector<Tensor>{g, g}; }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<Scalar> out(a.vec());
    const Scalar* pb = b.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
    REFNET_ELEMWISE_FOR(i, n) out[static_cast<std::size_t>(i)] -= pb[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [](const Tensor& g) { return std::vector<Tensor>{g, neg(g)}; }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<Scalar> out(a.vec());
    const Scalar* pb = b.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
    REFNET_ELEMWISE_FOR(i, n) out[static_cast<std::size_t>(i)] *= pb[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [a, b](const Tensor& g) {
                       std::vector<Tensor> pg(2);
                       if (a.needs_grad()) pg[0] = mul(g, b);
                       if (b.needs_grad()) pg[1] = mul(g, a);
                       return pg;
                   },
                   "mul");
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_scalar(const Tensor& a, Scalar v) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x += v;
    return make_op(a.shape(), std::move(out), {a},
                   [](const Tensor& g) { return std::vector<Tensor>{g}; }, "add_scalar");
}

Tensor mul_scalar(const Tensor& a, Scalar v) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x *= v;
    return make_op(a.shape(), std::move(out), {a},
                   [v](const Tensor& g) { return std::vector<Tensor>{mul_scalar(g, v)}; },
                   "mul_scalar");
}

Tensor square(const Tensor& a) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x *= x;
    return make_op(a.shape(), std::move(out), {a},
                   [a](const Tensor& g) {
                       return std::vector<Tensor>{mul_scalar(mul(g, a), 2.0)};
                   },
                   "square");
}

Tensor exp_op(const Tensor& a) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x = std::exp(x);
    return make_op(a.shape(), std::move(out), {a},
                   [a](const Tensor& g) { return std::vector<Tensor>{mul(g, exp_op(a))}; },
                   "exp");
}

Tensor reciprocal(const Tensor& a) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x = 1.0 / x;
    return make_op(a.shape(), std::move(out), {a},
                   [a](const Tensor& g) {
                       return std::vector<Tensor>{neg(mul(g, square(reciprocal(a))))};
                   },
                   "reciprocal");
}

Tensor sqrt_op(const Tensor& a, Scalar eps) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x = std::sqrt(x + eps);
    return make_op(a.shape(), std::move(out), {a},
                   [a, eps](const Tensor& g) {
                       return std::vector<Tensor>{mul_scalar(mul(g, rsqrt_op(a, eps)), 0.5)};
                   },
                   "sqrt");
}

Tensor rsqrt_op(const Tensor& a, Scalar eps) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x = 1.0 / std::sqrt(x + eps);
    return make_op(a.shape(), std::move(out), {a},
                   [a, eps](const Tensor& g) {
                       Tensor r = rsqrt_op(a, eps);
                       return std::vector<Tensor>{mul_scalar(mul(g, mul(r, mul(r, r))), -0.5)};
                   },
                   "rsqrt");
}

Tensor relu(const Tensor& a) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x = x > 0.0 ? x : 0.0;
    return make_op(a.shape(), std::move(out), {a},
                   [a](const Tensor& g) {
                       std::vector<Scalar> mask(a.vec());
                       for (auto& m : mask) m = m > 0.0 ? 1.0 : 0.0;
                       return std::vector<Tensor>{mul(g, Tensor::from_data(a.shape(), std::move(mask)))};
                   },
                   "relu");
}

Tensor leaky_relu(const Tensor& a, Scalar slope) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x = x > 0.0 ? x : slope * x;
    return make_op(a.shape(), std::move(out), {a},
                   [a, slope](const Tensor& g) {
                       std::vector<Scalar> mask(a.vec());
                       for (auto& m : mask) m = m > 0.0 ? 1.0 : slope;
                       return std::vector<Tensor>{mul(g, Tensor::from_data(a.shape(), std::move(mask)))};
                   },
                   "leaky_relu");
}

Tensor sigmoid(const Tensor& a) {
    std::vector<Scalar> out(a.vec());
    for (auto& x : out) x = 1.0 / (1.0 + std::exp(-x));
    return make_op(a.shape(), std::move(out), {a},
                   [a](const Tensor& g) {
                       Tensor s = sigmoid(a);
                       return std::vector<Tensor>{mul(g, mul(s, add_scalar(neg(s), 1.0)))};
                   },
                   "sigmoid");
}

Tensor sum(const Tensor& a) {
    double acc = 0;
    for (Scalar v : a.vec()) acc += v;
    const Shape ashape = a.shape();
    return make_op({1}, {static_cast<Scalar>(acc)}, {a},
                   [ashape](const Tensor& g) {
                       return std::vector<Tensor>{broadcast_scalar(g, ashape)};
                   },
                   "sum");
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<Scalar>(a.numel())); }

Tensor broadcast_scalar(const Tensor& s, const Shape& shape) {
    if (s.numel() != 1) throw std::invalid_argument("broadcast_scalar: source not scalar");
    std::vector<Scalar> out(static_cast<std::size_t>(shape_numel(shape)), s.data()[0]);
    return make_op(shape, std::move(out), {s},
                   [](const Tensor& g) { return std::vector<Tensor>{sum(g)}; },
                   "broadcast_scalar");
}

Tensor sum_per_sample(const Tensor& a) {
    const int n = a.shape().at(0);
    const int k = per_sample_numel(a.shape());
    std::vector<Scalar> out(n);
    const Scalar* pa = a.data();
    for (int i = 0; i < n; ++i) {
        double acc = 0;
        for (int j = 0; j < k; ++j) acc += pa[static_cast<std::size_t>(i) * k + j];
        out[i] = static_cast<Scalar>(acc);
    }
    const Shape ashape = a.shape();
    return make_op({n}, std::move(out), {a},
                   [ashape](const Tensor& g) {
                       return std::vector<Tensor>{broadcast_per_sample(g, ashape)};
                   },
                   "sum_per_sample");
}

Tensor broadcast_per_sample(const Tensor& v, const Shape& shape) {
    const int n = shape.at(0);
    if (v.shape().size() != 1 || v.shape()[0] != n)
        throw std::invalid_argument("broadcast_per_sample: need [N] source");
    const int k = per_sample_numel(shape);
    std::vector<Scalar> out(static_cast<std::size_t>(n) * k);
    const Scalar* pv = v.data();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(i) * k + j] = pv[i];
    return make_op(shape, std::move(out), {v},
                   [](const Tensor& g) { return std::vector<Tensor>{sum_per_sample(g)}; },
                   "broadcast_per_sample");
}

Tensor spatial_sum(const Tensor& x) {
    const auto [n, c, h, w] = dims4(x, "spatial_sum");
    std::vector<Scalar> out(static_cast<std::size_t>(n) * c);
    const Scalar* px = x.data();
    for (int i = 0; i < n * c; ++i) {
        double acc = 0;
        for (int j = 0; j < h * w; ++j) acc += px[static_cast<std::size_t>(i) * h * w + j];
        out[i] = static_cast<Scalar>(acc);
    }
    const int hh = h, ww = w;
    return make_op({n, c}, std::move(out), {x},
                   [hh, ww](const Tensor& g) {
                       return std::vector<Tensor>{broadcast_hw(g, hh, ww)};
                   },
                   "spatial_sum");
}

Tensor global_avg_pool(const Tensor& x) {
    const auto [n, c, h, w] = dims4(x, "global_avg_pool");
    (void)n;
    (void)c;
    return mul_scalar(spatial_sum(x), 1.0 / static_cast<Scalar>(h * w));
}

Tensor broadcast_hw(const Tensor& v, int h, int w) {
    if (v.shape().size() != 2) throw std::invalid_argument("broadcast_hw: need [N,C] source");
    const int n = v.shape()[0], c = v.shape()[1];
    std::vector<Scalar> out(static_cast<std::size_t>(n) * c * h * w);
    const Scalar* pv = v.data();
    for (int i = 0; i < n * c; ++i)
        for (int j = 0; j < h * w; ++j) out[static_cast<std::size_t>(i) * h * w + j] = pv[i];
    return make_op({n, c, h, w}, std::move(out), {v},
                   [](const Tensor& g) { return std::vector<Tensor>{spatial_sum(g)}; },
                   "broadcast_hw");
}

Tensor channel_sum(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() < 2) throw std::invalid_argument("channel_sum: rank >= 2 required");
    const int n = s[0], c = s[1];
    int k = 1;
    for (std::size_t i = 2; i < s.size(); ++i) k *= s[i];
    std::vector<double> acc(c, 0.0);
    const Scalar* px = x.data();
    for (int i = 0; i < n; ++i)
        for (int cc = 0; cc < c; ++cc)
            for (int j = 0; j < k; ++j)
                acc[cc] += px[(static_cast<std::size_t>(i) * c + cc) * k + j];
    std::vector<Scalar> out(c);
    for (int cc = 0; cc < c; ++cc) out[cc] = static_cast<Scalar>(acc[cc]);
    const Shape xshape = s;
    return make_op({c}, std::move(out), {x},
                   [xshape](const Tensor& g) {
                       return std::vector<Tensor>{channel_broadcast(g, xshape)};
                   },
                   "channel_sum");
}

Tensor channel_broadcast(const Tensor& cvec, const Shape& shape) {
    if (shape.size() < 2) throw std::invalid_argument("channel_broadcast: rank >= 2 required");
    const int n = shape[0], c = shape[1];
    if (cvec.shape().size() != 1 || cvec.shape()[0] != c)
        throw std::invalid_argument("channel_broadcast: need [C] source");
    int k = 1;
    for (std::size_t i = 2; i < shape.size(); ++i) k *= shape[i];
    std::vector<Scalar> out(static_cast<std::size_t>(n) * c * k);
    const Scalar* pv = cvec.data();
    for (int i = 0; i < n; ++i)
        for (int cc = 0; cc < c; ++cc)
            for (int j = 0; j < k; ++j)
                out[(static_cast<std::size_t>(i) * c + cc) * k + j] = pv[cc];
    return make_op(shape, std::move(out), {cvec},
                   [](const Tensor& g) { return std::vector<Tensor>{channel_sum(g)}; },
                   "channel_broadcast");
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
    const auto& s = x.shape();
    if (s.size() < 2 || b.shape().size() != 1 || b.shape()[0] != s[1])
        throw std::invalid_argument("add_channel_bias: bias must be [C]");
    return add(x, channel_broadcast(b, s));
}

Tensor channel_scale(const Tensor& x, const Tensor& sc) {
    const auto& s = x.shape();
    if (s.size() < 2 || sc.shape().size() != 1 || sc.shape()[0] != s[1])
        throw std::invalid_argument("channel_scale: scale must be [C]");
    return mul(x, channel_broadcast(sc, s));
}

Tensor group_reduce_mean(const Tensor& x, int groups) {
    const auto [n, c, h, w] = dims4(x, "group_reduce_mean");
    if (groups <= 0 || c % groups != 0)
        throw std::invalid_argument("group_reduce_mean: C must divide by groups");
    const int cpg = c / groups;
    const int ge = cpg * h * w;
    std::vector<Scalar> out(static_cast<std::size_t>(n) * groups);
    const Scalar* px = x.data();
    for (int i = 0; i < n; ++i)
        for (int g = 0; g < groups; ++g) {
            double acc = 0;
            for (int j = 0; j < ge; ++j)
                acc += px[(static_cast<std::size_t>(i) * c + g * cpg) * h * w + j];
            out[static_cast<std::size_t>(i) * groups + g] = static_cast<Scalar>(acc / ge);
        }
    const Shape xshape = x.shape();
    const int gcount = groups;
    return make_op({n, groups}, std::move(out), {x},
                   [xshape, gcount, ge](const Tensor& g) {
                       return std::vector<Tensor>{
                           mul_scalar(group_broadcast(g, xshape, gcount), 1.0 / ge)};
                   },
                   "group_reduce_mean");
}

Tensor group_broadcast(const Tensor& v, const Shape& xshape, int groups) {
    if (xshape.size() != 4) throw std::invalid_argument("group_broadcast: rank-4 target required");
    const int n = xshape[0], c = xshape[1], h = xshape[2], w = xshape[3];
    if (v.shape() != Shape{n, groups})
        throw std::invalid_argument("group_broadcast: need [N,G] source");
    const int cpg = c / groups;
    const int ge = cpg * h * w;
    std::vector<Scalar> out(static_cast<std::size_t>(n) * c * h * w);
    const Scalar* pv = v.data();
    for (int i = 0; i < n; ++i)
        for (int g = 0; g < groups; ++g) {
            const Scalar val = pv[static_cast<std::size_t>(i) * groups + g];
            Scalar* dst = out.data() + (static_cast<std::size_t>(i) * c + g * cpg) * h * w;
            for (int j = 0; j < ge; ++j) dst[j] = val;
        }
    const int gcount = groups;
    return make_op(xshape, std::move(out), {v},
                   [gcount, ge](const Tensor& g) {
                       return std::vector<Tensor>{
                           mul_scalar(group_reduce_mean(g, gcount), static_cast<Scalar>(ge))};
                   },
                   "group_broadcast");
}

Tensor group_norm_op(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                     Scalar eps) {
    const auto [n, c, h, w] = dims4(x, "group_norm");
    if (groups <= 0 || c % groups != 0)
        throw std::invalid_argument("group_norm: C must divide by groups");
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        throw std::invalid_argument("group_norm: gamma/beta must be [C]");
    const int cpg = c / groups;
    const int hw = h * w;
    const int ge = cpg * hw;

    auto stats = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(n) * groups * 2);
    std::vector<Scalar> out(x.vec().size());
    const Scalar* px = x.data();
    const Scalar* pg = gamma.data();
    const Scalar* pb = beta.data();
    for (int i = 0; i < n; ++i)
        for (int g = 0; g < groups; ++g) {
            const Scalar* src = px + (static_cast<std::size_t>(i) * c + g * cpg) * hw;
            double s1 = 0, s2 = 0;
            for (int j = 0; j < ge; ++j) {
                s1 += src[j];
                s2 += src[j] * src[j];
            }
            const Scalar mu = static_cast<Scalar>(s1 / ge);
            const Scalar var = static_cast<Scalar>(s2 / ge - mu * mu);
            const Scalar inv = 1.0 / std::sqrt(var + eps);
            (*stats)[(static_cast<std::size_t>(i) * groups + g) * 2] = mu;
            (*stats)[(static_cast<std::size_t>(i) * groups + g) * 2 + 1] = inv;
            Scalar* dst = out.data() + (static_cast<std::size_t>(i) * c + g * cpg) * hw;
            for (int cc = 0; cc < cpg; ++cc) {
                const Scalar gm = pg[g * cpg + cc];
                const Scalar bt = pb[g * cpg + cc];
                const Scalar* s = src + static_cast<std::size_t>(cc) * hw;
                Scalar* d = dst + static_cast<std::size_t>(cc) * hw;
                for (int j = 0; j < hw; ++j) d[j] = (s[j] - mu) * inv * gm + bt;
            }
        }

    const int nn_ = n, cc_ = c, hh = h, ww = w, gr = groups;
    return make_op(
        {n, c, h, w}, std::move(out), {x, gamma, beta},
        [x, gamma, beta, stats, nn_, cc_, hh, ww, gr, cpg](const Tensor& g) {
            if (grad_enabled())
                throw std::logic_error("group_norm: second-order gradients unsupported");
            const int hw2 = hh * ww;
            const int ge2 = cpg * hw2;
            std::vector<Scalar> dx(x.vec().size(), 0.0);
            std::vector<double> dgamma(static_cast<std::size_t>(cc_), 0.0);
            std::vector<double> dbeta(static_cast<std::size_t>(cc_), 0.0);
            const Scalar* px2 = x.data();
            const Scalar* pgm = gamma.data();
            const Scalar* pgrad = g.data();
            for (int i = 0; i < nn_; ++i)
                for (int grp = 0; grp < gr; ++grp) {
                    const Scalar mu = (*stats)[(static_cast<std::size_t>(i) * gr + grp) * 2];
                    const Scalar inv = (*stats)[(static_cast<std::size_t>(i) * gr + grp) * 2 + 1];
                    const std::size_t base = (static_cast<std::size_t>(i) * cc_ + grp * cpg) * hw2;
                    double s1 = 0, s2 = 0;
                    for (int cc = 0; cc < cpg; ++cc) {
                        const Scalar gm = pgm[grp * cpg + cc];
                        const Scalar* xs = px2 + base + static_cast<std::size_t>(cc) * hw2;
                        const Scalar* gs = pgrad + base + static_cast<std::size_t>(cc) * hw2;
                        for (int j = 0; j < hw2; ++j) {
                            const Scalar xn = (xs[j] - mu) * inv;
                            const Scalar gh = gs[j] * gm;
                            s1 += gh;
                            s2 += gh * xn;
                            dgamma[static_cast<std::size_t>(grp) * cpg + cc] += gs[j] * xn;
                            dbeta[static_cast<std::size_t>(grp) * cpg + cc] += gs[j];
                        }
                    }
                    const Scalar m1 = static_cast<Scalar>(s1 / ge2);
                    const Scalar m2 = static_cast<Scalar>(s2 / ge2);
                    for (int cc = 0; cc < cpg; ++cc) {
                        const Scalar gm = pgm[grp * cpg + cc];
                        const Scalar* xs = px2 + base + static_cast<std::size_t>(cc) * hw2;
                        const Scalar* gs = pgrad + base + static_cast<std::size_t>(cc) * hw2;
                        Scalar* ds = dx.data() + base + static_cast<std::size_t>(cc) * hw2;
                        for (int j = 0; j < hw2; ++j) {
                            const Scalar xn = (xs[j] - mu) * inv;
                            ds[j] = inv * (gs[j] * gm - m1 - xn * m2);
                        }
                    }
                }
            std::vector<Tensor> pg_out(3);
            if (x.needs_grad()) pg_out[0] = Tensor::from_data(x.shape(), std::move(dx));
            if (gamma.needs_grad()) {
                std::vector<Scalar> dg(dgamma.begin(), dgamma.end());
                pg_out[1] = Tensor::from_data({cc_}, std::move(dg));
            }
            if (beta.needs_grad()) {
                std::vector<Scalar> db(dbeta.begin(), dbeta.end());
                pg_out[2] = Tensor::from_data({cc_}, std::move(db));
            }
            return pg_out;
        },
        "group_norm");
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const auto da = dims4(a, "concat_channels");
    const auto db = dims4(b, "concat_channels");
    if (da.n != db.n || da.h != db.h || da.w != db.w)
        throw std::invalid_argument("concat_channels: batch/spatial mismatch");
    const int cout = da.c + db.c;
    std::vector<Scalar> out(static_cast<std::size_t>(da.n) * cout * da.h * da.w);
    const int hw = da.h * da.w;
    for (int i = 0; i < da.n; ++i) {
        std::copy_n(a.data() + static_cast<std::size_t>(i) * da.c * hw, static_cast<std::size_t>(da.c) * hw,
                    out.data() + static_cast<std::size_t>(i) * cout * hw);
        std::copy_n(b.data() + static_cast<std::size_t>(i) * db.c * hw, static_cast<std::size_t>(db.c) * hw,
                    out.data() + static_cast<std::size_t>(i) * cout * hw + static_cast<std::size_t>(da.c) * hw);
    }
    const int ca = da.c;
    return make_op({da.n, cout, da.h, da.w}, std::move(out), {a, b},
                   [ca, cout](const Tensor& g) {
                       return std::vector<Tensor>{slice_channels(g, 0, ca),
                                                  slice_channels(g, ca, cout)};
                   },
                   "concat_channels");
}

namespace {
// adjoint of slice: place g back into a zero tensor of the original width
Tensor channel_embed(const Tensor& g, int c0, int c_total) {
    const auto d = dims4(g, "channel_embed");
    std::vector<Scalar> out(static_cast<std::size_t>(d.n) * c_total * d.h * d.w, 0.0);
    const int hw = d.h * d.w;
    for (int i = 0; i < d.n; ++i)
        std::copy_n(g.data() + static_cast<std::size_t>(i) * d.c * hw, static_cast<std::size_t>(d.c) * hw,
                    out.data() + (static_cast<std::size_t>(i) * c_total + c0) * hw);
    const int cc0 = c0, cc1 = c0 + d.c;
    return make_op({d.n, c_total, d.h, d.w}, std::move(out), {g},
                   [cc0, cc1](const Tensor& gg) {
                       return std::vector<Tensor>{slice_channels(gg, cc0, cc1)};
                   },
                   "channel_embed");
}
} // namespace

Tensor slice_channels(const Tensor& x, int c0, int c1) {
    const auto d = dims4(x, "slice_channels");
    if (c0 < 0 || c1 > d.c || c0 >= c1) throw std::invalid_argument("slice_channels: bad range");
    const int cs = c1 - c0;
    const int hw = d.h * d.w;
    std::vector<Scalar> out(static_cast<std::size_t>(d.n) * cs * hw);
    for (int i = 0; i < d.n; ++i)
        std::copy_n(x.data() + (static_cast<std::size_t>(i) * d.c + c0) * hw,
                    static_cast<std::size_t>(cs) * hw,
                    out.data() + static_cast<std::size_t>(i) * cs * hw);
    const int ctotal = d.c, cc0 = c0;
    return make_op({d.n, cs, d.h, d.w}, std::move(out), {x},
                   [cc0, ctotal](const Tensor& g) {
                       return std::vector<Tensor>{channel_embed(g, cc0, ctotal)};
                   },
                   "slice_channels");
}

namespace {
// adjoint of slice_batch: place g back into a zero tensor with the original batch
Tensor batch_embed(const Tensor& g, int i0, int n_total) {
    Shape shape = g.shape();
    const int k = per_sample_numel(shape);
    shape[0] = n_total;
    std::vector<Scalar> out(static_cast<std::size_t>(n_total) * k, 0.0);
    std::copy(g.vec().begin(), g.vec().end(), out.begin() + static_cast<std::size_t>(i0) * k);
    const int nslice = g.shape()[0];
    return make_op(shape, std::move(out), {g},
                   [i0, nslice](const Tensor& gg) {
                       return std::vector<Tensor>{slice_batch(gg, i0, i0 + nslice)};
                   },
                   "batch_embed");
}
} // namespace

Tensor slice_batch(const Tensor& x, int i0, int i1) {
    const auto& s = x.shape();
    if (s.empty() || i0 < 0 || i1 > s[0] || i0 >= i1)
        throw std::invalid_argument("slice_batch: bad range");
    const int k = per_sample_numel(s);
    Shape shape = s;
    shape[0] = i1 - i0;
    std::vector<Scalar> out(x.vec().begin() + static_cast<std::size_t>(i0) * k,
                            x.vec().begin() + static_cast<std::size_t>(i1) * k);
    const int n_total = s[0], ii0 = i0;
    return make_op(shape, std::move(out), {x},
                   [ii0, n_total](const Tensor& g) {
                       return std::vector<Tensor>{batch_embed(g, ii0, n_total)};
                   },
                   "slice_batch");
}

Tensor transpose2d(const Tensor& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose2d: rank-2 required");
    const int r = a.shape()[0], c = a.shape()[1];
    std::vector<Scalar> out(static_cast<std::size_t>(r) * c);
    const Scalar* pa = a.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = pa[static_cast<std::size_t>(i) * c + j];
    return make_op({c, r}, std::move(out), {a},
                   [](const Tensor& g) { return std::vector<Tensor>{transpose2d(g)}; },
                   "transpose2d");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: incompatible shapes");
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<Scalar> out(static_cast<std::size_t>(m) * n, 0.0);
    const Scalar* pa = a.data();
    const Scalar* pb = b.data();
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const Scalar av = pa[static_cast<std::size_t>(i) * k + kk];
            const Scalar* brow = pb + static_cast<std::size_t>(kk) * n;
            Scalar* orow = out.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    return make_op({m, n}, std::move(out), {a, b},
                   [a, b](const Tensor& g) {
                       std::vector<Tensor> pg(2);
                       if (a.needs_grad()) pg[0] = matmul(g, transpose2d(b));
                       if (b.needs_grad()) pg[1] = matmul(transpose2d(a), g);
                       return pg;
                   },
                   "matmul");
}

Tensor outer_add(const Tensor& u, const Tensor& v) {
    if (u.shape().size() != 1 || v.shape().size() != 1)
        throw std::invalid_argument("outer_add: rank-1 inputs required");
    const int n = u.shape()[0], m = v.shape()[0];
    std::vector<Scalar> out(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(i) * m + j] = u.data()[i] + v.data()[j];
    return make_op({n, m}, std::move(out), {u, v},
                   [u, v](const Tensor& g) {
                       std::vector<Tensor> pg(2);
                       if (u.needs_grad()) pg[0] = sum_per_sample(g);
                       if (v.needs_grad()) pg[1] = sum_per_sample(transpose2d(g));
                       return pg;
                   },
                   "outer_add");
}

} // namespace refnet::nn
