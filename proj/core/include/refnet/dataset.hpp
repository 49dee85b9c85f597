#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "refnet/affine.hpp"
#include "refnet/scene_gen.hpp"

namespace refnet {

enum class Split { Target, Reference, OpenSource, Heldout };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetRecord {
    std::string image_path;                    // relative to the dataset root
    std::map<std::string, std::string> masks;  // category name -> mask path
    std::vector<std::string> categories;       // categories present in the image
    Split split = Split::Target;

    bool has_category(const std::string& c) const {
        return std::find(categories.begin(), categories.end(), c) != categories.end();
    }
};

struct DatasetIndex {
    std::string root;
    std::vector<DatasetRecord> records;
    std::vector<std::string> target_categories;
    std::vector<std::string> open_categories;
    int height = 0;
    int width = 0;

    std::vector<int> by_split(Split s) const;
    /// Reference records of one category, in index order ("first-indexed"
    /// is the evaluation reference). k > 0 truncates to the first k.
    std::vector<int> references_of(const std::string& category, int k = 0) const;
};

struct SplitCounts {
    int target = 200;
    int open_source = 300;
    int heldout = 60;
    int k_references = 10; // per target category
};

struct DataGenConfig {
    ShapeSceneSpec target_spec; // shared canvas/size parameters
    ShapeSceneSpec open_spec;
    SplitCounts counts;
    bool require_disjoint = true;

    void validate() const;
};

/// Generate every split to disk (images/, masks/<category>/, index.jsonl,
/// meta.json) and return the in-memory index. Deterministic per seed.
DatasetIndex build_splits(const DataGenConfig& cfg, const std::string& out_dir,
                          std::uint64_t seed);

DatasetIndex load_index(const std::string& dir);
void save_index(const DatasetIndex& index, const std::string& dir);

/// Decoding front-end with an access audit: every mask read is tallied per
/// split, so tests can prove the training path never touches ground-truth
/// masks of the unlabeled target split.
class DatasetReader {
public:
    explicit DatasetReader(const DatasetIndex& index) : index_(&index) {}

    Image load_image(const DatasetRecord& rec) const;
    BinaryMask load_mask(const DatasetRecord& rec, const std::string& category) const;

    std::map<Split, int> mask_read_counts() const;
    void reset_audit();

private:
    const DatasetIndex* index_;
    mutable std::mutex mu_;
    mutable std::map<Split, int> mask_reads_;
    mutable std::map<std::string, Image> image_cache_;
    mutable std::map<std::string, BinaryMask> mask_cache_;
};

struct AugmentPolicy {
    bool enabled = true;
    AffineRanges geometry;
    double brightness_delta = 0.1; // photometric jitter, image only
    double contrast_delta = 0.1;
};

/// Identical geometric transform for image and mask (nearest for the mask),
/// photometric jitter on the image only. Disabled policy is the identity.
std::pair<Image, BinaryMask> augment(const Image& image, const BinaryMask& mask, Rng& rng,
                                     const AugmentPolicy& policy);

} // namespace refnet
