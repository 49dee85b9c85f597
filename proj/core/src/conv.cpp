#include <Eigen/Core>
#include <array>
#include <cmath>

#include "refnet/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refnet::nn {

namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvDims {
    int n, cin, h, w;      // input
    int cout, kh, kw;      // kernel
    int ho, wo;            // output
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int pad, const char* op) {
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument(std::string(op) + ": rank-4 tensors required");
    if (xs[1] != ws[1])
        throw std::invalid_argument(std::string(op) + ": channel mismatch");
    if (stride < 1 || pad < 0) throw std::invalid_argument(std::string(op) + ": bad stride/pad");
    ConvDims d;
    d.n = xs[0], d.cin = xs[1], d.h = xs[2], d.w = xs[3];
    d.cout = ws[0], d.kh = ws[2], d.kw = ws[3];
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.ho <= 0 || d.wo <= 0) throw std::invalid_argument(std::string(op) + ": empty output");
    return d;
}

// col is [K x M] row-major, K = cin*kh*kw, M = ho*wo
void im2col(const Scalar* x, const ConvDims& d, int stride, int pad, Scalar* col) {
    const int M = d.ho * d.wo;
    for (int c = 0; c < d.cin; ++c) {
        const Scalar* plane = x + static_cast<std::size_t>(c) * d.h * d.w;
        for (int ky = 0; ky < d.kh; ++ky) {
            for (int kx = 0; kx < d.kw; ++kx) {
                Scalar* row = col + (static_cast<std::size_t>(c) * d.kh * d.kw + ky * d.kw + kx) * M;
                for (int oy = 0; oy < d.ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    Scalar* dst = row + static_cast<std::size_t>(oy) * d.wo;
                    if (iy < 0 || iy >= d.h) {
                        std::fill_n(dst, d.wo, 0.0);
                        continue;
                    }
                    const Scalar* src = plane + static_cast<std::size_t>(iy) * d.w;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix >= 0 && ix < d.w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const Scalar* col, const ConvDims& d, int stride, int pad, Scalar* gx) {
    const int M = d.ho * d.wo;
    for (int c = 0; c < d.cin; ++c) {
        Scalar* plane = gx + static_cast<std::size_t>(c) * d.h * d.w;
        for (int ky = 0; ky < d.kh; ++ky) {
            for (int kx = 0; kx < d.kw; ++kx) {
                const Scalar* row = col + (static_cast<std::size_t>(c) * d.kh * d.kw + ky * d.kw + kx) * M;
                for (int oy = 0; oy < d.ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= d.h) continue;
                    const Scalar* src = row + static_cast<std::size_t>(oy) * d.wo;
                    Scalar* dst = plane + static_cast<std::size_t>(iy) * d.w;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

std::vector<Scalar> conv_forward_data(const Tensor& x, const Tensor& w, int stride, int pad,
                                     const ConvDims& d) {
    const int K = d.cin * d.kh * d.kw;
    const int M = d.ho * d.wo;
    std::vector<Scalar> out(static_cast<std::size_t>(d.n) * d.cout * M);
    Eigen::Map<const RowMat> wm(w.data(), d.cout, K);
#pragma omp parallel for schedule(static)
    for (int nn = 0; nn < d.n; ++nn) {
        RowMat col(K, M);
        im2col(x.data() + static_cast<std::size_t>(nn) * d.cin * d.h * d.w, d, stride, pad,
               col.data());
        Eigen::Map<RowMat> om(out.data() + static_cast<std::size_t>(nn) * d.cout * M, d.cout, M);
        om.noalias() = wm * col;
    }
    return out;
}

std::vector<Scalar> conv_input_grad_data(const Tensor& gy, const Tensor& w, int stride, int pad,
                                        const ConvDims& d) {
    const int K = d.cin * d.kh * d.kw;
    const int M = d.ho * d.wo;
    std::vector<Scalar> gx(static_cast<std::size_t>(d.n) * d.cin * d.h * d.w, 0.0);
    Eigen::Map<const RowMat> wm(w.data(), d.cout, K);
#pragma omp parallel for schedule(static)
    for (int nn = 0; nn < d.n; ++nn) {
        RowMat colg(K, M);
        Eigen::Map<const RowMat> gym(gy.data() + static_cast<std::size_t>(nn) * d.cout * M, d.cout, M);
        colg.noalias() = wm.transpose() * gym;
        col2im_add(colg.data(), d, stride, pad,
                   gx.data() + static_cast<std::size_t>(nn) * d.cin * d.h * d.w);
    }
    return gx;
}

std::vector<Scalar> conv_weight_grad_data(const Tensor& x, const Tensor& gy, int stride, int pad,
                                         const ConvDims& d) {
    const int K = d.cin * d.kh * d.kw;
    const int M = d.ho * d.wo;
    // per-sample partials, reduced in fixed order for determinism
    std::vector<RowMat> partial(d.n);
#pragma omp parallel for schedule(static)
    for (int nn = 0; nn < d.n; ++nn) {
        RowMat col(K, M);
        im2col(x.data() + static_cast<std::size_t>(nn) * d.cin * d.h * d.w, d, stride, pad,
               col.data());
        Eigen::Map<const RowMat> gym(gy.data() + static_cast<std::size_t>(nn) * d.cout * M, d.cout, M);
        partial[nn].noalias() = gym * col.transpose();
    }
    std::vector<Scalar> gw(static_cast<std::size_t>(d.cout) * K, 0.0);
    Eigen::Map<RowMat> gwm(gw.data(), d.cout, K);
    for (int nn = 0; nn < d.n; ++nn) gwm += partial[nn];
    return gw;
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    const ConvDims d = conv_dims(x.shape(), w.shape(), stride, pad, "conv2d");
    std::vector<Scalar> out = conv_forward_data(x, w, stride, pad, d);
    return make_op({d.n, d.cout, d.ho, d.wo}, std::move(out), {x, w},
                   [x, w, stride, pad, d](const Tensor& g) {
                       std::vector<Tensor> pg(2);
                       if (x.needs_grad())
                           pg[0] = conv2d_input_grad(g, w, stride, pad, d.h, d.w);
                       if (w.needs_grad())
                           pg[1] = conv2d_weight_grad(x, g, stride, pad, d.kh, d.kw);
                       return pg;
                   },
                   "conv2d");
}

Tensor conv2d_bias(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const ConvDims d = conv_dims(x.shape(), w.shape(), stride, pad, "conv2d_bias");
    if (b.shape() != Shape{d.cout}) throw std::invalid_argument("conv2d_bias: bias must be [Cout]");
    std::vector<Scalar> out = conv_forward_data(x, w, stride, pad, d);
    const int M = d.ho * d.wo;
    const Scalar* pb = b.data();
    for (int nn = 0; nn < d.n; ++nn)
        for (int c = 0; c < d.cout; ++c) {
            Scalar* dst = out.data() + (static_cast<std::size_t>(nn) * d.cout + c) * M;
            const Scalar bv = pb[c];
            for (int j = 0; j < M; ++j) dst[j] += bv;
        }
    return make_op({d.n, d.cout, d.ho, d.wo}, std::move(out), {x, w, b},
                   [x, w, b, stride, pad, d](const Tensor& g) {
                       std::vector<Tensor> pg(3);
                       if (x.needs_grad())
                           pg[0] = conv2d_input_grad(g, w, stride, pad, d.h, d.w);
                       if (w.needs_grad())
                           pg[1] = conv2d_weight_grad(x, g, stride, pad, d.kh, d.kw);
                       if (b.needs_grad()) pg[2] = channel_sum(g);
                       return pg;
                   },
                   "conv2d_bias");
}

Tensor conv2d_input_grad(const Tensor& gy, const Tensor& w, int stride, int pad, int in_h,
                         int in_w) {
    Shape xs{gy.shape().at(0), w.shape().at(1), in_h, in_w};
    const ConvDims d = conv_dims(xs, w.shape(), stride, pad, "conv2d_input_grad");
    if (d.ho != gy.shape().at(2) || d.wo != gy.shape().at(3) || d.cout != gy.shape().at(1))
        throw std::invalid_argument("conv2d_input_grad: gy shape inconsistent");
    std::vector<Scalar> gx = conv_input_grad_data(gy, w, stride, pad, d);
    return make_op(xs, std::move(gx), {gy, w},
                   [gy, w, stride, pad](const Tensor& u) {
                       std::vector<Tensor> pg(2);
                       if (gy.needs_grad()) pg[0] = conv2d(u, w, stride, pad);
                       if (w.needs_grad())
                           pg[1] = conv2d_weight_grad(u, gy, stride, pad, w.shape().at(2),
                                                      w.shape().at(3));
                       return pg;
                   },
                   "conv2d_input_grad");
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, int stride, int pad, int kh,
                          int kw) {
    Shape ws{gy.shape().at(1), x.shape().at(1), kh, kw};
    const ConvDims d = conv_dims(x.shape(), ws, stride, pad, "conv2d_weight_grad");
    if (d.ho != gy.shape().at(2) || d.wo != gy.shape().at(3))
        throw std::invalid_argument("conv2d_weight_grad: gy shape inconsistent");
    std::vector<Scalar> gw = conv_weight_grad_data(x, gy, stride, pad, d);
    return make_op(ws, std::move(gw), {x, gy},
                   [x, gy, stride, pad, d](const Tensor& uw) {
                       std::vector<Tensor> pg(2);
                       if (x.needs_grad())
                           pg[0] = conv2d_input_grad(gy, uw, stride, pad, d.h, d.w);
                       if (gy.needs_grad()) pg[1] = conv2d(x, uw, stride, pad);
                       return pg;
                   },
                   "conv2d_weight_grad");
}

Tensor upsample_nearest2(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() != 4) throw std::invalid_argument("upsample_nearest2: rank-4 required");
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    std::vector<Scalar> out(static_cast<std::size_t>(n) * c * 4 * h * w);
    for (int p = 0; p < n * c; ++p) {
        const Scalar* src = x.data() + static_cast<std::size_t>(p) * h * w;
        Scalar* dst = out.data() + static_cast<std::size_t>(p) * 4 * h * w;
        for (int y = 0; y < 2 * h; ++y)
            for (int xx = 0; xx < 2 * w; ++xx)
                dst[static_cast<std::size_t>(y) * 2 * w + xx] = src[static_cast<std::size_t>(y / 2) * w + xx / 2];
    }
    return make_op({n, c, 2 * h, 2 * w}, std::move(out), {x},
                   [](const Tensor& g) { return std::vector<Tensor>{sumpool2(g)}; },
                   "upsample_nearest2");
}

Tensor sumpool2(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() != 4 || s[2] % 2 || s[3] % 2)
        throw std::invalid_argument("sumpool2: even rank-4 input required");
    const int n = s[0], c = s[1], h = s[2] / 2, w = s[3] / 2;
    std::vector<Scalar> out(static_cast<std::size_t>(n) * c * h * w);
    for (int p = 0; p < n * c; ++p) {
        const Scalar* src = x.data() + static_cast<std::size_t>(p) * 4 * h * w;
        Scalar* dst = out.data() + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                dst[static_cast<std::size_t>(y) * w + xx] =
                    src[static_cast<std::size_t>(2 * y) * 2 * w + 2 * xx] +
                    src[static_cast<std::size_t>(2 * y) * 2 * w + 2 * xx + 1] +
                    src[static_cast<std::size_t>(2 * y + 1) * 2 * w + 2 * xx] +
                    src[static_cast<std::size_t>(2 * y + 1) * 2 * w + 2 * xx + 1];
    }
    return make_op({n, c, h, w}, std::move(out), {x},
                   [](const Tensor& g) { return std::vector<Tensor>{upsample_nearest2(g)}; },
                   "sumpool2");
}

namespace {

// Precomputed bilinear sampling table for one (H, W, A) combination; shared
// by the gather op and its scatter adjoint.
struct WarpPlan {
    int h = 0, w = 0;
    std::vector<std::array<int, 4>> idx;     // source indices per output pixel, -1 = outside
    std::vector<std::array<Scalar, 4>> wgt;
    bool identity = false;
};

std::shared_ptr<WarpPlan> build_plan(int h, int w, const AffineTransform& A) {
    auto plan = std::make_shared<WarpPlan>();
    plan->h = h;
    plan->w = w;
    if (A.is_identity()) {
        plan->identity = true;
        return plan;
    }
    if (!A.invertible()) throw std::invalid_argument("warp_bilinear: singular transform");
    const AffineTransform inv = A.inverse();
    const double cx = (w - 1) * 0.5, cy = (h - 1) * 0.5;
    plan->idx.resize(static_cast<std::size_t>(h) * w);
    plan->wgt.resize(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = x - cx, v = y - cy;
            const double sx = inv.m[0] * u + inv.m[1] * v + inv.m[2] + cx;
            const double sy = inv.m[3] * u + inv.m[4] * v + inv.m[5] + cy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const Scalar fx = static_cast<Scalar>(sx - x0);
            const Scalar fy = static_cast<Scalar>(sy - y0);
            auto& id = plan->idx[static_cast<std::size_t>(y) * w + x];
            auto& wg = plan->wgt[static_cast<std::size_t>(y) * w + x];
            const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
            const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
            const Scalar ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
            for (int j = 0; j < 4; ++j) {
                const bool in = xs[j] >= 0 && xs[j] < w && ys[j] >= 0 && ys[j] < h;
                id[j] = in ? ys[j] * w + xs[j] : -1;
                wg[j] = ws[j];
            }
        }
    return plan;
}

Tensor warp_scatter(const Tensor& g, std::shared_ptr<WarpPlan> plan);

Tensor warp_gather(const Tensor& x, std::shared_ptr<WarpPlan> plan) {
    const auto& s = x.shape();
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    std::vector<Scalar> out;
    if (plan->identity) {
        out = x.vec();
    } else {
        out.resize(x.vec().size());
        for (int p = 0; p < n * c; ++p) {
            const Scalar* src = x.data() + static_cast<std::size_t>(p) * h * w;
            Scalar* dst = out.data() + static_cast<std::size_t>(p) * h * w;
            for (std::size_t i = 0; i < plan->idx.size(); ++i) {
                const auto& id = plan->idx[i];
                const auto& wg = plan->wgt[i];
                Scalar v = 0.0;
                for (int j = 0; j < 4; ++j)
                    if (id[j] >= 0) v += wg[j] * src[id[j]];
                dst[i] = v;
            }
        }
    }
    return make_op(s, std::move(out), {x},
                   [plan](const Tensor& g) { return std::vector<Tensor>{warp_scatter(g, plan)}; },
                   "warp_gather");
}

Tensor warp_scatter(const Tensor& g, std::shared_ptr<WarpPlan> plan) {
    const auto& s = g.shape();
    const int n = s[0], c = s[1], h = s[2], w = s[3];
    std::vector<Scalar> out;
    if (plan->identity) {
        out = g.vec();
    } else {
        out.assign(g.vec().size(), 0.0);
        for (int p = 0; p < n * c; ++p) {
            const Scalar* src = g.data() + static_cast<std::size_t>(p) * h * w;
            Scalar* dst = out.data() + static_cast<std::size_t>(p) * h * w;
            for (std::size_t i = 0; i < plan->idx.size(); ++i) {
                const auto& id = plan->idx[i];
                const auto& wg = plan->wgt[i];
                for (int j = 0; j < 4; ++j)
                    if (id[j] >= 0) dst[id[j]] += wg[j] * src[i];
            }
        }
    }
    return make_op(s, std::move(out), {g},
                   [plan](const Tensor& gg) { return std::vector<Tensor>{warp_gather(gg, plan)}; },
                   "warp_scatter");
}

} // namespace

Tensor warp_bilinear(const Tensor& x, const AffineTransform& A) {
    const auto& s = x.shape();
    if (s.size() != 4) throw std::invalid_argument("warp_bilinear: rank-4 required");
    return warp_gather(x, build_plan(s[2], s[3], A));
}

} // namespace refnet::nn
