#include "refnet/metrics.hpp"

#include <stdexcept>

namespace refnet {

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("confusion_counts: shape mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.grid.size(); ++i) {
        const bool p = pred.grid[i] != 0;
        const bool g = gt.grid[i] != 0;
        if (p && g) ++c.tp;
        else if (p && !g) ++c.fp;
        else if (!p && g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
    const std::uint64_t n = c.total();
    if (n == 0) throw std::invalid_argument("metrics_from_counts: empty counts");

    Metrics m;
    m.pixel_accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(n);

    const std::uint64_t gt_obj = c.tp + c.fn;
    const std::uint64_t gt_bg = c.tn + c.fp;
    const bool obj_present = (c.tp + c.fp + c.fn) > 0; // in prediction or ground truth
    const bool bg_present = (c.tn + c.fp + c.fn) > 0;

    double acc_sum = 0, iou_sum = 0;
    int classes = 0;
    if (obj_present) {
        const double acc = gt_obj > 0 ? static_cast<double>(c.tp) / gt_obj : 0.0;
        const double iou = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
        acc_sum += acc;
        iou_sum += iou;
        ++classes;
        m.fw_iou += (static_cast<double>(gt_obj) / n) * iou;
    }
    if (bg_present) {
        const double acc = gt_bg > 0 ? static_cast<double>(c.tn) / gt_bg : 0.0;
        const double iou = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp + c.fn);
        acc_sum += acc;
        iou_sum += iou;
        ++classes;
        m.fw_iou += (static_cast<double>(gt_bg) / n) * iou;
    }
    m.mean_pixel_accuracy = classes ? acc_sum / classes : 0.0;
    m.mean_iou = classes ? iou_sum / classes : 0.0;
    return m;
}

} // namespace refnet
