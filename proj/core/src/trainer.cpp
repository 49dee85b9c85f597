#include "refnet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <ostream>

#include "refnet/checkpoint.hpp"

using json = nlohmann::json;

namespace refnet {

namespace {

using nn::Tensor;

constexpr int kDeskBatch = 6; // auto-shrunk batch at desk scale

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct PairTensors {
    Tensor targets;     // [N,3,H,W]
    Tensor masked_refs; // [N,3,H,W]
    Tensor gt_labeled;  // [A,1,H,W] masks of the labeled block
    int labeled = 0;    // pairs [0, labeled) are labeled positives
    int positives = 0;  // pairs [0, positives) are positives; rest negatives
    int total = 0;
};

// order: labeled positives, unlabeled positives, negatives
PairTensors assemble_pairs(std::vector<PairSample>& pairs) {
    std::stable_sort(pairs.begin(), pairs.end(), [](const PairSample& a, const PairSample& b) {
        auto rank = [](const PairSample& p) { return p.negative ? 2 : (p.has_gt ? 0 : 1); };
        return rank(a) < rank(b);
    });
    PairTensors out;
    out.total = static_cast<int>(pairs.size());
    std::vector<Image> targets, refs;
    std::vector<BinaryMask> gts;
    for (const auto& p : pairs) {
        targets.push_back(p.target);
        refs.push_back(masked_image(p.ref_image, p.ref_mask));
        if (!p.negative && p.has_gt) {
            ++out.labeled;
            gts.push_back(p.gt);
        }
        if (!p.negative) ++out.positives;
    }
    out.targets = to_tensor(targets);
    out.masked_refs = to_tensor(refs);
    if (!gts.empty()) out.gt_labeled = to_tensor(gts);
    return out;
}

std::uint64_t checksum_of(const nn::ParamStore& s) { return s.checksum(); }

json checksums(const TrainState& st) {
    return {{"seg", checksum_of(st.model->params())},
            {"critic_out", checksum_of(st.critic_out->params())},
            {"critic_in", checksum_of(st.critic_in->params())}};
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite ") + what);
}

struct CriticStepStats {
    double loss_out = 0, loss_in = 0;
    double gp_out = 0, gp_in = 0;
    double fake_out = 0, real_out = 0, pseudo_out = 0;
    double fake_in = 0, real_in = 0, pseudo_in = 0;
};

} // namespace

void TrainConfig::validate() const {
    weights.validate();
    if (n_critic < 1) throw std::invalid_argument("TrainConfig: n_critic must be >= 1");
    if (lr <= 0) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
    if (max_iterations < 0) throw std::invalid_argument("TrainConfig: negative max_iterations");
    if (self_sup_radius < 1) throw std::invalid_argument("TrainConfig: self_sup_radius >= 1");
    if (neg_ratio < 0 || neg_ratio > 1) throw std::invalid_argument("TrainConfig: neg_ratio in [0,1]");
    if (labeled_ratio < 0 || labeled_ratio > 1)
        throw std::invalid_argument("TrainConfig: labeled_ratio in [0,1]");
}

TrainState TrainState::init(const TrainConfig& cfg) {
    cfg.validate();
    Rng master(cfg.seed);
    const std::uint64_t seed_model = master.next_u64();
    const std::uint64_t seed_out = master.next_u64();
    const std::uint64_t seed_in = master.next_u64();
    const std::uint64_t seed_rng = master.next_u64();

    TrainState st;
    st.arch = cfg.arch;
    st.critic_arch = cfg.critic_arch;
    st.model = std::make_unique<Segmenter>(cfg.arch, seed_model);
    st.critic_out = std::make_unique<Critic>(cfg.critic_arch, seed_out);
    st.critic_in = std::make_unique<Critic>(cfg.critic_arch, seed_in);
    st.opt_seg = std::make_unique<nn::Adam>(cfg.lr, cfg.seg_beta1, cfg.seg_beta2);
    st.opt_critic_out = std::make_unique<nn::Adam>(cfg.lr, cfg.critic_beta1, cfg.critic_beta2);
    st.opt_critic_in = std::make_unique<nn::Adam>(cfg.lr, cfg.critic_beta1, cfg.critic_beta2);
    st.rng = Rng(seed_rng);
    return st;
}

namespace {

CriticStepStats critic_update(const TrainConfig& cfg, const DatasetIndex& index,
                              const DatasetReader& reader, TrainState& st,
                              const SamplerConfig& scfg, const PseudoRadiusRange& prange) {
    TrainingBatch batch = sample_training_batch(index, reader, st.rng, scfg);
    PairTensors pt = assemble_pairs(batch.pairs);

    Tensor fake_mask;
    {
        nn::GradMode off(false); // fakes are constants for the critic loss
        fake_mask = st.model->segment(pt.targets, pt.masked_refs, cfg.toggles.condition);
    }

    std::vector<Image> open_images;
    std::vector<BinaryMask> open_masks;
    for (const auto& o : batch.open) {
        open_images.push_back(o.image);
        open_masks.push_back(o.mask);
    }
    const Tensor open_t = to_tensor(open_images);
    const Tensor open_masks_t = to_tensor(open_masks);

    std::vector<int> radii;
    if (cfg.toggles.pseudo_triplet)
        for (std::size_t i = 0; i < open_masks.size(); ++i)
            radii.push_back(sample_pseudo_radius(st.rng, prange));

    CriticStepStats stats;
    auto update_side = [&](Side side, Critic& critic, nn::Adam& opt, double& loss_v, double& gp_v,
                           double& fake_v, double& real_v, double& pseudo_v) {
        const Triplet fake = make_fake_triplet(pt.targets, fake_mask, side);
        const Triplet real = make_real_triplet(open_t, open_masks_t, side);
        std::optional<Triplet> pseudo;
        if (cfg.toggles.pseudo_triplet)
            pseudo = make_pseudo_triplet(open_t, open_masks, radii, side, prange);
        std::vector<double> eps(static_cast<std::size_t>(pt.total));
        for (auto& e : eps) e = st.rng.uniform();
        const CriticLossResult res =
            critic_loss(critic, fake, pseudo, real, eps, cfg.weights.lambda_gp);
        require_finite(res.total.item(), side == Side::Outer ? "outer critic loss"
                                                             : "inner critic loss");
        nn::GradMap grads = nn::backward(res.total);
        opt.step(critic.params(), grads);
        loss_v = res.total.item();
        gp_v = res.penalty;
        fake_v = res.fake_score;
        real_v = res.real_score;
        pseudo_v = res.pseudo_score;
    };

    // fixed order: outer first, then inner
    if (cfg.toggles.outer_critic)
        update_side(Side::Outer, *st.critic_out, *st.opt_critic_out, stats.loss_out, stats.gp_out,
                    stats.fake_out, stats.real_out, stats.pseudo_out);
    if (cfg.toggles.inner_critic)
        update_side(Side::Inner, *st.critic_in, *st.opt_critic_in, stats.loss_in, stats.gp_in,
                    stats.fake_in, stats.real_in, stats.pseudo_in);
    return stats;
}

struct SegStepStats {
    double total = 0, dice = 0, rep = 0, self_sup = 0, d_out = 0, d_in = 0;
};

SegStepStats seg_update(const TrainConfig& cfg, const DatasetIndex& index,
                        const DatasetReader& reader, TrainState& st, const SamplerConfig& scfg) {
    TrainingBatch batch = sample_training_batch(index, reader, st.rng, scfg);
    PairTensors pt = assemble_pairs(batch.pairs);

    // affine for the equivariance term, drawn whether or not the term is on
    // (keeps the RNG stream layout independent of the toggle set size)
    AffineRanges ranges;
    const AffineTransform A = sample_affine(st.rng, ranges, index.height, index.width);

    st.critic_out->params().set_requires_grad(false);
    st.critic_in->params().set_requires_grad(false);

    SegLossParts parts;
    SegStepStats stats;
    const Tensor pred = st.model->segment(pt.targets, pt.masked_refs, cfg.toggles.condition);

    if (cfg.toggles.dice_supervision) {
        Tensor dice;
        const int negatives = pt.total - pt.positives;
        const int gt_count = pt.labeled + negatives;
        if (gt_count > 0) {
            Tensor acc = Tensor::zeros({1});
            if (pt.labeled > 0) {
                const Tensor d = dice_loss(nn::slice_batch(pred, 0, pt.labeled), pt.gt_labeled,
                                           cfg.weights.tau);
                acc = nn::add(acc, nn::mul_scalar(d, static_cast<double>(pt.labeled) / gt_count));
            }
            if (negatives > 0) {
                const Tensor zeros = Tensor::zeros({negatives, 1, index.height, index.width});
                const Tensor d = dice_loss(nn::slice_batch(pred, pt.positives, pt.total), zeros,
                                           cfg.weights.tau);
                acc = nn::add(acc, nn::mul_scalar(d, static_cast<double>(negatives) / gt_count));
            }
            parts.dice = acc;
            stats.dice = acc.item();
        }
    }

    if (cfg.weights.zeta > 0 && pt.positives > 0) {
        const Tensor pred_pos = nn::slice_batch(pred, 0, pt.positives);
        const Tensor targets_pos = nn::slice_batch(pt.targets, 0, pt.positives);
        const Tensor refs_pos = nn::slice_batch(pt.masked_refs, 0, pt.positives);
        const Tensor pred3 =
            nn::concat_channels(nn::concat_channels(pred_pos, pred_pos), pred_pos);
        const Tensor seg_feat = st.model->ref_embedding(nn::mul(pred3, targets_pos));
        const Tensor ref_feat = st.model->ref_embedding(refs_pos);
        parts.rep = mmd_loss(seg_feat, ref_feat, cfg.mmd);
        stats.rep = parts.rep.item();
    }

    if (cfg.toggles.self_supervision) {
        parts.self_sup = self_supervision_loss_from(*st.model, pred, pt.targets, pt.masked_refs,
                                                    A, cfg.self_sup_radius, cfg.toggles.condition);
        stats.self_sup = parts.self_sup.item();
    }

    if (cfg.toggles.outer_critic) {
        const Triplet fake = make_fake_triplet(pt.targets, pred, Side::Outer);
        parts.d_out_fake = nn::mean(st.critic_out->score(fake.to_tensor()));
        stats.d_out = parts.d_out_fake.item();
    }
    if (cfg.toggles.inner_critic) {
        const Triplet fake = make_fake_triplet(pt.targets, pred, Side::Inner);
        parts.d_in_fake = nn::mean(st.critic_in->score(fake.to_tensor()));
        stats.d_in = parts.d_in_fake.item();
    }

    const Tensor total = total_seg_loss(parts, cfg.weights);
    stats.total = total.item();
    require_finite(stats.total, "segmenter loss");

    nn::GradMap grads = nn::backward(total);
    st.opt_seg->step(st.model->params(), grads);

    st.critic_out->params().set_requires_grad(true);
    st.critic_in->params().set_requires_grad(true);
    return stats;
}

} // namespace

TrainResult train(const TrainConfig& cfg, const DatasetIndex& index, const DatasetReader& reader,
                  TrainState& st, const std::string& out_dir, std::ostream* log_stream) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    const std::string ckpt_path = out_dir + "/checkpoint.ckpt";

    SamplerConfig scfg;
    scfg.batch = std::min(cfg.batch, kDeskBatch);
    scfg.neg_ratio = cfg.neg_ratio;
    scfg.labeled_ratio = cfg.labeled_ratio;
    scfg.k_references = cfg.k_references;
    scfg.augment.enabled = cfg.augment;
    scfg.num_workers = cfg.num_workers;

    const PseudoRadiusRange prange = PseudoRadiusRange::for_resolution(index.height);
    const bool critics_on = cfg.toggles.outer_critic || cfg.toggles.inner_critic;

    TrainResult result;
    result.checkpoint_path = ckpt_path;

    auto emit = [&](json j) {
        if (log_stream) *log_stream << j.dump() << "\n";
    };

    std::int64_t critic_step = st.iteration * (critics_on ? cfg.n_critic : 0);
    try {
        while (st.iteration < cfg.max_iterations) {
            if (critics_on) {
                for (int k = 0; k < cfg.n_critic; ++k) {
                    const double t0 = now_ms();
                    const CriticStepStats cs =
                        critic_update(cfg, index, reader, st, scfg, prange);
                    ++critic_step;
                    emit(json{{"kind", "critic"},
                              {"step", critic_step},
                              {"iter", st.iteration + 1},
                              {"k", k + 1},
                              {"loss_out", cs.loss_out},
                              {"loss_in", cs.loss_in},
                              {"gp_out", cs.gp_out},
                              {"gp_in", cs.gp_in},
                              {"fake_out", cs.fake_out},
                              {"real_out", cs.real_out},
                              {"pseudo_out", cs.pseudo_out},
                              {"fake_in", cs.fake_in},
                              {"real_in", cs.real_in},
                              {"pseudo_in", cs.pseudo_in},
                              {"wall_ms", now_ms() - t0},
                              {"checksums", checksums(st)}});
                }
            }
            const int seg_block = cfg.swap_alternation ? cfg.n_critic : 1;
            for (int s = 0; s < seg_block && st.iteration < cfg.max_iterations; ++s) {
                const double t0 = now_ms();
                const SegStepStats ss = seg_update(cfg, index, reader, st, scfg);
                ++st.iteration;
                emit(json{{"kind", "segmenter"},
                          {"step", st.iteration},
                          {"iter", st.iteration},
                          {"L_total", ss.total},
                          {"L_dic", ss.dice},
                          {"L_rep", ss.rep},
                          {"L_sel", ss.self_sup},
                          {"D_out", ss.d_out},
                          {"D_in", ss.d_in},
                          {"wall_ms", now_ms() - t0},
                          {"checksums", checksums(st)}});
                if (cfg.checkpoint_every > 0 && st.iteration % cfg.checkpoint_every == 0)
                    save_checkpoint(ckpt_path, st, cfg);
            }
        }
    } catch (const std::runtime_error& e) {
        // NaN (or I/O) abort: keep the last periodic checkpoint on disk
        result.nan_abort = true;
        result.nan_message = e.what();
        result.iterations = st.iteration;
        emit(json{{"kind", "abort"}, {"error", e.what()}, {"iter", st.iteration}});
        return result;
    }

    save_checkpoint(ckpt_path, st, cfg);
    result.iterations = st.iteration;
    return result;
}

} // namespace refnet
