#pragma once

#include "refnet/dataset.hpp"
#include "refnet/metrics.hpp"
#include "refnet/segmenter.hpp"

namespace refnet {

struct EvalConfig {
    float threshold = 0.5f;
    /// Average soft predictions over all references of a category instead of
    /// using the first-indexed one.
    bool average_references = false;
    /// Test hook: report metrics of a perfect oracle (prediction == GT).
    bool oracle_stub = false;
    int batch = 8;
    int k_references = 0; // 0 = all (selection still uses the first-indexed)
    bool condition = true;
};

struct CategoryEval {
    ConfusionCounts counts;
    Metrics metrics;
    int pairs = 0;
};

struct MetricReport {
    ConfusionCounts overall;
    Metrics metrics;
    std::map<std::string, CategoryEval> per_category;
    int images = 0;
    int pairs = 0;

    std::string to_text() const;
    std::string summary_line() const;
};

/// Held-out protocol: for every held-out image and each of its categories,
/// segment with that category's evaluation reference, binarize at the
/// threshold, and accumulate confusion counts overall and per category.
MetricReport evaluate(const Segmenter& model, const DatasetIndex& index,
                      const DatasetReader& reader, const EvalConfig& cfg);

/// Mean predicted foreground fraction over (held-out image, absent
/// category) pairs; the supervision target for such pairs is an all-zero
/// mask, so a trained model should stay near 0.
double mean_negative_foreground_fraction(const Segmenter& model, const DatasetIndex& index,
                                         const DatasetReader& reader, float threshold = 0.5f);

} // namespace refnet
