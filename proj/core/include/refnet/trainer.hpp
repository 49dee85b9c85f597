#pragma once

#include <iosfwd>
#include <memory>

#include "refnet/critic.hpp"
#include "refnet/losses.hpp"
#include "refnet/sampler.hpp"

namespace refnet {

/// One switch per ablation column: no self-supervision, no condition image,
/// no pseudo triplet, no inner/outer critic, no dice supervision.
struct AblationToggles {
    bool self_supervision = true;
    bool condition = true;
    bool pseudo_triplet = true;
    bool inner_critic = true;
    bool outer_critic = true;
    bool dice_supervision = true;
};

struct TrainConfig {
    LossWeights weights;          // tau=1, lambda=10, xi=zeta=eta=1
    int n_critic = 5;             // critic updates per segmenter update
    int batch = 6;
    double lr = 1e-4;             // all networks
    double seg_beta1 = 0.9, seg_beta2 = 0.999;
    double critic_beta1 = 0.0, critic_beta2 = 0.9;
    int max_iterations = 800;     // segmenter steps
    std::uint64_t seed = 1;
    AblationToggles toggles;
    int k_references = 10;        // 0 = all labeled reference samples
    ArchConfig arch{.depth = 3, .base_width = 16};
    CriticConfig critic_arch{.base_width = 16};
    int self_sup_radius = 2;
    double neg_ratio = 0.25;
    double labeled_ratio = 0.5;
    bool augment = true;
    int checkpoint_every = 200;
    /// Alternative reading of the alternation interval: equal blocks of
    /// n_critic critic steps and n_critic segmenter steps.
    bool swap_alternation = false;
    MmdKernelConfig mmd;
    int num_workers = 0;

    void validate() const;
};

/// Everything training owns: the three networks, their optimizers, the
/// sampling RNG and the step counter. Checkpoints serialize all of it.
struct TrainState {
    ArchConfig arch;
    CriticConfig critic_arch;
    std::unique_ptr<Segmenter> model;
    std::unique_ptr<Critic> critic_out;
    std::unique_ptr<Critic> critic_in;
    std::unique_ptr<nn::Adam> opt_seg;
    std::unique_ptr<nn::Adam> opt_critic_out;
    std::unique_ptr<nn::Adam> opt_critic_in;
    std::int64_t iteration = 0;
    Rng rng;

    static TrainState init(const TrainConfig& cfg);
};

struct TrainResult {
    std::int64_t iterations = 0;
    bool nan_abort = false;
    std::string nan_message;
    std::string checkpoint_path;
};

/// Alternating min-max loop: n_critic critic updates (both enabled critics)
/// per segmenter update. Emits one JSON line per update to `log_stream`
/// (step, losses, wall time, parameter checksums). NaN anywhere aborts,
/// retaining the last periodic checkpoint.
TrainResult train(const TrainConfig& cfg, const DatasetIndex& index, const DatasetReader& reader,
                  TrainState& state, const std::string& out_dir, std::ostream* log_stream);

} // namespace refnet
