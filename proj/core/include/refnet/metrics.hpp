#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "refnet/image.hpp"

namespace refnet {

/// Two-class (background/object) pixel confusion counts. "Positive" is the
/// object class.
struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt);

struct Metrics {
    double pixel_accuracy = 0;      // PA
    double mean_pixel_accuracy = 0; // MPA
    double mean_iou = 0;            // MIoU
    double fw_iou = 0;              // FWIoU (per-class IoU weighted by GT frequency)
};

/// PA = (TP+TN)/N. Per-class accuracy/IoU averaged for MPA/MIoU; classes
/// absent from both prediction and ground truth are excluded from the
/// means. FWIoU weights class IoU by its ground-truth pixel frequency.
Metrics metrics_from_counts(const ConfusionCounts& c);

} // namespace refnet
