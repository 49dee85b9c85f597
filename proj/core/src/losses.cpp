#include "refnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "refnet/morphology.hpp"

namespace refnet {

using nn::Tensor;

namespace {
constexpr nn::Scalar kGpNormEps = 1e-24;
} // namespace

Tensor dice_loss(const Tensor& pred, const Tensor& gt, double tau) {
    if (tau < 0.0) throw std::invalid_argument("dice_loss: tau must be >= 0");
    if (pred.shape() != gt.shape()) throw std::invalid_argument("dice_loss: shape mismatch");
    const Tensor inter = nn::sum_per_sample(nn::mul(pred, gt));
    const Tensor sums = nn::add(nn::sum_per_sample(pred), nn::sum_per_sample(gt));
    const Tensor ratio = nn::mul(nn::add_scalar(nn::mul_scalar(inter, 2.0), tau),
                                 nn::reciprocal(nn::add_scalar(sums, tau)));
    return nn::mean(nn::add_scalar(nn::neg(ratio), 1.0));
}

namespace {

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
    const Tensor sqa = nn::sum_per_sample(nn::square(a));
    const Tensor sqb = nn::sum_per_sample(nn::square(b));
    const Tensor gram = nn::matmul(a, nn::transpose2d(b));
    return nn::add(nn::outer_add(sqa, sqb), nn::mul_scalar(gram, -2.0));
}

nn::Scalar median_of(std::vector<nn::Scalar> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

} // namespace

Tensor mmd_loss(const Tensor& feat_a, const Tensor& feat_b, const MmdKernelConfig& cfg) {
    if (feat_a.shape().size() != 2 || feat_b.shape().size() != 2)
        throw std::invalid_argument("mmd_loss: feature sets must be [N,D]");
    if (feat_a.shape()[0] < 1 || feat_b.shape()[0] < 1)
        throw std::invalid_argument("mmd_loss: empty feature set");
    if (feat_a.shape()[1] != feat_b.shape()[1])
        throw std::invalid_argument("mmd_loss: feature dimension mismatch");

    const Tensor d2aa = pairwise_sqdist(feat_a, feat_a);
    const Tensor d2bb = pairwise_sqdist(feat_b, feat_b);
    const Tensor d2ab = pairwise_sqdist(feat_a, feat_b);

    std::vector<double> bandwidths;
    if (cfg.median_heuristic) {
        const double med = std::max(median_of(d2ab.vec()), 1e-12);
        const double sigma0 = std::sqrt(med / 2.0);
        for (double s : cfg.median_scales) bandwidths.push_back(sigma0 * s);
    } else {
        bandwidths = cfg.bandwidths;
    }
    if (bandwidths.empty()) throw std::invalid_argument("mmd_loss: no kernel bandwidth");
    for (double s : bandwidths)
        if (s <= 0.0) throw std::invalid_argument("mmd_loss: bandwidth must be positive");

    Tensor total = Tensor::zeros({1});
    for (double sigma : bandwidths) {
        const double c = -1.0 / (2.0 * sigma * sigma);
        const Tensor kaa = nn::mean(nn::exp_op(nn::mul_scalar(d2aa, c)));
        const Tensor kbb = nn::mean(nn::exp_op(nn::mul_scalar(d2bb, c)));
        const Tensor kab = nn::mean(nn::exp_op(nn::mul_scalar(d2ab, c)));
        total = nn::add(total, nn::sub(nn::add(kaa, kbb), nn::mul_scalar(kab, 2.0)));
    }
    return total;
}

Tensor self_supervision_loss(const Segmenter& model, const Tensor& target,
                             const Tensor& masked_ref, const AffineTransform& A, int radius,
                             bool condition) {
    return self_supervision_loss_from(model, model.segment(target, masked_ref, condition),
                                      target, masked_ref, A, radius, condition);
}

Tensor self_supervision_loss_from(const Segmenter& model, const Tensor& pred,
                                  const Tensor& target, const Tensor& masked_ref,
                                  const AffineTransform& A, int radius, bool condition) {
    if (radius < 1) throw std::invalid_argument("self_supervision_loss: radius must be >= 1");
    if (!A.invertible()) throw std::invalid_argument("self_supervision_loss: singular transform");

    const Tensor pred_t = model.segment(nn::warp_bilinear(target, A), masked_ref, condition);

    const int n = pred.shape()[0];
    std::vector<BinaryMask> w, wt;
    w.reserve(n);
    wt.reserve(n);
    for (int i = 0; i < n; ++i) {
        w.push_back(boundary_weight_map(soft_mask_from_tensor(pred, i), radius));
        wt.push_back(boundary_weight_map(soft_mask_from_tensor(pred_t, i), radius));
    }
    const Tensor w_c = to_tensor(w);   // constants: no gradient through the band maps
    const Tensor wt_c = to_tensor(wt);

    const Tensor lhs = nn::mul(wt_c, pred_t);
    const Tensor rhs = nn::warp_bilinear(nn::mul(w_c, pred), A);
    return nn::mean(nn::square(nn::sub(lhs, rhs)));
}

Tensor gradient_penalty(const ScoreFn& critic, const Triplet& endpoint_e,
                        const Triplet& endpoint_a, const std::vector<double>& eps, double lambda) {
    const Triplet mixed = interpolate_triplets(endpoint_e, endpoint_a, eps);
    Tensor x_hat = mixed.to_tensor().detach();
    x_hat.set_requires_grad(true);
    const Tensor scores = critic(x_hat);
    nn::GradMap grads = nn::backward(nn::sum(scores), /*create_graph=*/true);
    const Tensor g = grads.at(x_hat);
    const Tensor norm = nn::sqrt_op(nn::sum_per_sample(nn::square(g)), kGpNormEps);
    return nn::mul_scalar(nn::mean(nn::square(nn::add_scalar(norm, -1.0))), lambda);
}

Tensor gradient_penalty(const Critic& critic, const Triplet& endpoint_e,
                        const Triplet& endpoint_a, double eps, double lambda) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("gradient_penalty: eps outside [0,1]");
    const std::vector<double> ev(static_cast<std::size_t>(endpoint_e.batch()), eps);
    return gradient_penalty([&critic](const Tensor& t) { return critic.score(t); }, endpoint_e,
                            endpoint_a, ev, lambda);
}

CriticLossResult critic_loss(const ScoreFn& critic, const Triplet& fake,
                             const std::optional<Triplet>& pseudo, const Triplet& real,
                             const std::vector<double>& eps, double lambda) {
    if (fake.side != real.side || (pseudo && pseudo->side != fake.side))
        throw std::invalid_argument("critic_loss: mixed triplet sides");
    CriticLossResult r;
    const Tensor fa = nn::mean(critic(fake.to_tensor()));
    const Tensor re = nn::mean(critic(real.to_tensor()));
    Tensor data_term;
    if (pseudo) {
        const Tensor ps = nn::mean(critic(pseudo->to_tensor()));
        r.pseudo_score = ps.item();
        data_term = nn::sub(nn::add(nn::mul_scalar(fa, 0.5), nn::mul_scalar(ps, 0.5)), re);
    } else {
        data_term = nn::sub(fa, re);
    }
    const Tensor gp = gradient_penalty(critic, real, fake, eps, lambda);
    r.fake_score = fa.item();
    r.real_score = re.item();
    r.penalty = gp.item();
    r.total = nn::add(data_term, gp);
    return r;
}

CriticLossResult critic_loss(const Critic& critic, const Triplet& fake,
                             const std::optional<Triplet>& pseudo, const Triplet& real,
                             const std::vector<double>& eps, double lambda) {
    return critic_loss([&critic](const Tensor& t) { return critic.score(t); }, fake, pseudo, real,
                       eps, lambda);
}

namespace {

void check_finite(const Tensor& t, const char* name) {
    if (!t.defined()) return;
    for (nn::Scalar v : t.vec())
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("total_seg_loss: non-finite ") + name);
}

} // namespace

Tensor total_seg_loss(const SegLossParts& parts, const LossWeights& w) {
    w.validate();
    check_finite(parts.dice, "L_dic");
    check_finite(parts.rep, "L_rep");
    check_finite(parts.self_sup, "L_sel");
    check_finite(parts.d_out_fake, "D_out");
    check_finite(parts.d_in_fake, "D_in");

    Tensor total = Tensor::zeros({1});
    if (parts.dice.defined()) total = nn::add(total, nn::mul_scalar(parts.dice, w.xi));
    if (parts.rep.defined()) total = nn::add(total, nn::mul_scalar(parts.rep, w.zeta));
    if (parts.self_sup.defined()) total = nn::add(total, nn::mul_scalar(parts.self_sup, w.eta));
    if (parts.d_out_fake.defined()) total = nn::sub(total, parts.d_out_fake);
    if (parts.d_in_fake.defined()) total = nn::sub(total, parts.d_in_fake);
    return total;
}

} // namespace refnet
