#include "refnet/evaluate.hpp"

#include <cmath>
#include <sstream>

namespace refnet {

namespace {

using nn::Tensor;

std::string fmt(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(6);
    os << v;
    return os.str();
}

std::string metrics_line(const Metrics& m) {
    return "PA=" + fmt(m.pixel_accuracy) + " MPA=" + fmt(m.mean_pixel_accuracy) +
           " MIoU=" + fmt(m.mean_iou) + " FWIoU=" + fmt(m.fw_iou);
}

Tensor masked_ref_tensor(const DatasetReader& reader, const DatasetIndex& index, int ref_idx,
                         const std::string& category) {
    const DatasetRecord& rec = index.records[static_cast<std::size_t>(ref_idx)];
    const Image img = reader.load_image(rec);
    const BinaryMask mask = reader.load_mask(rec, category);
    return to_tensor(std::vector<Image>{masked_image(img, mask)});
}

// predictions for a batch of target images against one reference (replicated)
std::vector<SoftMask> predict_batch(const Segmenter& model, const std::vector<Image>& targets,
                                    const Tensor& ref1, bool condition) {
    nn::GradMode off(false);
    const int n = static_cast<int>(targets.size());
    // replicate the single reference across the batch
    std::vector<double> rep(static_cast<std::size_t>(n) * ref1.numel());
    for (int i = 0; i < n; ++i)
        std::copy(ref1.vec().begin(), ref1.vec().end(),
                  rep.begin() + static_cast<std::size_t>(i) * ref1.numel());
    const auto& rs = ref1.shape();
    const Tensor refs = Tensor::from_data({n, rs[1], rs[2], rs[3]}, std::move(rep));
    const Tensor pred = model.segment(to_tensor(targets), refs, condition);
    std::vector<SoftMask> out;
    for (int i = 0; i < n; ++i) out.push_back(soft_mask_from_tensor(pred, i));
    return out;
}

} // namespace

MetricReport evaluate(const Segmenter& model, const DatasetIndex& index,
                      const DatasetReader& reader, const EvalConfig& cfg) {
    MetricReport report;
    const std::vector<int> heldout = index.by_split(Split::Heldout);
    report.images = static_cast<int>(heldout.size());

    // (record, category) pairs grouped by category so one reference serves a batch
    std::map<std::string, std::vector<int>> work;
    for (int idx : heldout)
        for (const auto& cat : index.records[static_cast<std::size_t>(idx)].categories)
            work[cat].push_back(idx);

    for (const auto& [category, rec_indices] : work) {
        const std::vector<int> refs = index.references_of(category, cfg.k_references);
        if (refs.empty())
            throw std::runtime_error("evaluate: no reference for category " + category);

        CategoryEval& ce = report.per_category[category];
        for (std::size_t start = 0; start < rec_indices.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop =
                std::min(rec_indices.size(), start + static_cast<std::size_t>(cfg.batch));
            std::vector<Image> targets;
            std::vector<BinaryMask> gts;
            for (std::size_t i = start; i < stop; ++i) {
                const DatasetRecord& rec =
                    index.records[static_cast<std::size_t>(rec_indices[i])];
                targets.push_back(reader.load_image(rec));
                gts.push_back(reader.load_mask(rec, category));
            }

            std::vector<SoftMask> preds;
            if (cfg.oracle_stub) {
                for (const auto& gt : gts) preds.push_back(gt.to_soft());
            } else if (cfg.average_references) {
                std::vector<SoftMask> acc;
                for (std::size_t r = 0; r < refs.size(); ++r) {
                    const Tensor ref = masked_ref_tensor(reader, index, refs[r], category);
                    auto p = predict_batch(model, targets, ref, cfg.condition);
                    if (acc.empty()) acc = std::move(p);
                    else
                        for (std::size_t i = 0; i < p.size(); ++i)
                            for (std::size_t j = 0; j < p[i].grid.size(); ++j)
                                acc[i].grid[j] += p[i].grid[j];
                }
                for (auto& sm : acc)
                    for (auto& v : sm.grid) v /= static_cast<float>(refs.size());
                preds = std::move(acc);
            } else {
                const Tensor ref = masked_ref_tensor(reader, index, refs.front(), category);
                preds = predict_batch(model, targets, ref, cfg.condition);
            }

            for (std::size_t i = 0; i < preds.size(); ++i) {
                const ConfusionCounts c =
                    confusion_counts(preds[i].binarize(cfg.threshold), gts[i]);
                ce.counts += c;
                report.overall += c;
                ++ce.pairs;
                ++report.pairs;
            }
        }
        ce.metrics = metrics_from_counts(ce.counts);
    }
    report.metrics = metrics_from_counts(report.overall);
    return report;
}

double mean_negative_foreground_fraction(const Segmenter& model, const DatasetIndex& index,
                                         const DatasetReader& reader, float threshold) {
    const std::vector<int> heldout = index.by_split(Split::Heldout);
    double total_fraction = 0;
    int pairs = 0;
    for (const auto& category : index.target_categories) {
        const std::vector<int> refs = index.references_of(category);
        if (refs.empty()) continue;
        std::vector<Image> targets;
        for (int idx : heldout) {
            const DatasetRecord& rec = index.records[static_cast<std::size_t>(idx)];
            if (!rec.has_category(category)) targets.push_back(reader.load_image(rec));
        }
        if (targets.empty()) continue;
        const nn::Tensor ref = masked_ref_tensor(reader, index, refs.front(), category);
        for (std::size_t start = 0; start < targets.size(); start += 8) {
            const std::size_t stop = std::min(targets.size(), start + 8);
            std::vector<Image> chunk(targets.begin() + static_cast<std::ptrdiff_t>(start),
                                     targets.begin() + static_cast<std::ptrdiff_t>(stop));
            for (const SoftMask& pred : predict_batch(model, chunk, ref, true)) {
                std::size_t fg = 0;
                for (float v : pred.grid) fg += v >= threshold ? 1 : 0;
                total_fraction += static_cast<double>(fg) / static_cast<double>(pred.grid.size());
                ++pairs;
            }
        }
    }
    if (pairs == 0) throw std::runtime_error("mean_negative_foreground_fraction: no negative pairs");
    return total_fraction / pairs;
}

std::string MetricReport::summary_line() const { return metrics_line(metrics); }

std::string MetricReport::to_text() const {
    std::ostringstream os;
    os << "refnet evaluation report\n";
    os << "images: " << images << "\n";
    os << "pairs: " << pairs << "\n";
    os << "overall: " << metrics_line(metrics) << "\n";
    os << "counts: tp=" << overall.tp << " fp=" << overall.fp << " fn=" << overall.fn
       << " tn=" << overall.tn << "\n";
    for (const auto& [cat, ce] : per_category) {
        os << "category " << cat << ": pairs=" << ce.pairs << " " << metrics_line(ce.metrics)
           << " tp=" << ce.counts.tp << " fp=" << ce.counts.fp << " fn=" << ce.counts.fn
           << " tn=" << ce.counts.tn << "\n";
    }
    return os.str();
}

} // namespace refnet
