#pragma once

#include "refnet/dataset.hpp"

namespace refnet {

/// One (target, reference) tuple. `gt` is meaningful when has_gt: the
/// record's annotated mask for labeled pairs, or all-zeros for negative
/// pairs (reference category absent from the target image).
struct PairSample {
    Image target;
    Image ref_image;
    BinaryMask ref_mask;
    BinaryMask gt;
    bool has_gt = false;
    bool negative = false;
    std::string category; // reference category
};

struct OpenSample {
    Image image;
    BinaryMask mask;
    std::string category;
};

struct TrainingBatch {
    std::vector<PairSample> pairs;
    std::vector<OpenSample> open;
};

struct SamplerConfig {
    int batch = 6;
    double neg_ratio = 0.25;    // fraction of pairs with no shared category
    double labeled_ratio = 0.5; // fraction of positive pairs drawn from the labeled reference split
    int k_references = 0;       // 0 = use all reference records
    AugmentPolicy augment;      // applied to labeled (image, mask) pairs
    int num_workers = 0;        // capped by REFNET_NUM_WORKERS; 0 = synchronous

    void validate() const;
};

/// Effective worker count after the REFNET_NUM_WORKERS cap.
int resolve_num_workers(int requested);

TrainingBatch sample_training_batch(const DatasetIndex& index, const DatasetReader& reader,
                                    Rng& rng, const SamplerConfig& cfg);

} // namespace refnet
