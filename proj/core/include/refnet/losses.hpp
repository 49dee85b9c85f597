#pragma once

#include <functional>
#include <optional>

#include "refnet/critic.hpp"
#include "refnet/segmenter.hpp"
#include "refnet/triplet.hpp"

namespace refnet {

struct LossWeights {
    double tau = 1.0;       // Dice smoothing
    double lambda_gp = 10.0;
    double xi = 1.0;        // Dice coefficient
    double zeta = 1.0;      // representation-consistency coefficient
    double eta = 1.0;       // self-supervision coefficient

    void validate() const {
        if (tau < 0 || lambda_gp < 0 || xi < 0 || zeta < 0 || eta < 0)
            throw std::invalid_argument("LossWeights: coefficients must be >= 0");
    }
};

struct MmdKernelConfig {
    bool median_heuristic = true;
    std::vector<double> median_scales{0.5, 1.0, 2.0};
    std::vector<double> bandwidths; // used when median_heuristic is off
};

/// Smoothed soft Dice: mean over the batch of
/// 1 - (2*sum(pred*gt) + tau) / (sum(pred) + sum(gt) + tau).
nn::Tensor dice_loss(const nn::Tensor& pred, const nn::Tensor& gt, double tau);

/// Biased (V-statistic) squared MMD between two sets of feature vectors
/// [Na,D] and [Nb,D], summed over RBF bandwidths
/// k(x,y) = exp(-|x-y|^2 / (2 sigma^2)).
nn::Tensor mmd_loss(const nn::Tensor& feat_a, const nn::Tensor& feat_b,
                    const MmdKernelConfig& cfg);

/// Equivariance consistency concentrated on boundary bands:
/// mean over pixels of (w' * F(Ax, ref) - A(w * F(x, ref)))^2, where the
/// weight maps w, w' (radius r, from the binarized predictions) are
/// constants for differentiation. Exactly 0 for the identity transform.
nn::Tensor self_supervision_loss(const Segmenter& model, const nn::Tensor& target,
                                 const nn::Tensor& masked_ref, const AffineTransform& A,
                                 int radius, bool condition = true);

/// Same loss, reusing an already-computed prediction for the untransformed
/// branch (one forward saved per step).
nn::Tensor self_supervision_loss_from(const Segmenter& model, const nn::Tensor& pred,
                                      const nn::Tensor& target, const nn::Tensor& masked_ref,
                                      const AffineTransform& A, int radius,
                                      bool condition = true);

using ScoreFn = std::function<nn::Tensor(const nn::Tensor&)>;

/// lambda * mean((|grad_I D(I)|_2 - 1)^2) at I = eps*I_e + (1-eps)*I_a.
/// Differentiable w.r.t. the critic parameters (double backward).
nn::Tensor gradient_penalty(const ScoreFn& critic, const Triplet& endpoint_e,
                            const Triplet& endpoint_a, const std::vector<double>& eps,
                            double lambda);
nn::Tensor gradient_penalty(const Critic& critic, const Triplet& endpoint_e,
                            const Triplet& endpoint_a, double eps, double lambda);

struct CriticLossResult {
    nn::Tensor total;
    double fake_score = 0, pseudo_score = 0, real_score = 0, penalty = 0;
};

/// 1/2 D(I_a) + 1/2 D(I_s) - D(I_e) + gradient penalty. Without a pseudo
/// triplet (ablation) the fake term takes full weight: D(I_a) - D(I_e) + GP.
CriticLossResult critic_loss(const ScoreFn& critic, const Triplet& fake,
                             const std::optional<Triplet>& pseudo, const Triplet& real,
                             const std::vector<double>& eps, double lambda);
CriticLossResult critic_loss(const Critic& critic, const Triplet& fake,
                             const std::optional<Triplet>& pseudo, const Triplet& real,
                             const std::vector<double>& eps, double lambda);

struct SegLossParts {
    nn::Tensor dice;    // undefined tensors mean "term absent"
    nn::Tensor rep;
    nn::Tensor self_sup;
    nn::Tensor d_out_fake; // mean critic score of the outer fake triplet
    nn::Tensor d_in_fake;
};

/// xi*L_dic + zeta*L_rep + eta*L_sel - D_out(I_a) - D_in(I_a).
/// Throws if any present part is not finite.
nn::Tensor total_seg_loss(const SegLossParts& parts, const LossWeights& w);

} // namespace refnet
