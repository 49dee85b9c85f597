#include "refnet/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "refnet/image_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace refnet {

std::string to_string(Split s) {
    switch (s) {
    case Split::Target: return "target";
    case Split::Reference: return "reference";
    case Split::OpenSource: return "open_source";
    case Split::Heldout: return "heldout";
    }
    throw std::logic_error("to_string: bad split");
}

Split split_from_string(const std::string& s) {
    if (s == "target") return Split::Target;
    if (s == "reference") return Split::Reference;
    if (s == "open_source") return Split::OpenSource;
    if (s == "heldout") return Split::Heldout;
    throw std::invalid_argument("unknown split: " + s);
}

std::vector<int> DatasetIndex::by_split(Split s) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == s) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> DatasetIndex::references_of(const std::string& category, int k) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == Split::Reference && records[i].has_category(category))
            out.push_back(static_cast<int>(i));
    if (k > 0 && static_cast<int>(out.size()) > k) out.resize(static_cast<std::size_t>(k));
    return out;
}

void DataGenConfig::validate() const {
    target_spec.validate();
    open_spec.validate();
    if (counts.target < 1 || counts.open_source < 1 || counts.heldout < 1 ||
        counts.k_references < 1)
        throw std::invalid_argument("DataGenConfig: counts must be positive");
    if (require_disjoint)
        for (auto c : target_spec.categories)
            for (auto o : open_spec.categories)
                if (c == o)
                    throw std::invalid_argument(
                        "DataGenConfig: category '" + to_string(c) +
                        "' appears in both target and open-source sets");
}

namespace {

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

DatasetRecord write_scene(const std::string& root, const Scene& scene, Split split,
                          const std::string& stem) {
    DatasetRecord rec;
    rec.split = split;
    rec.image_path = "images/" + stem + ".ppm";
    write_ppm(root + "/" + rec.image_path, scene.image);
    for (const auto& [cat, mask] : scene.masks) {
        const std::string name = to_string(cat);
        const std::string rel = "masks/" + name + "/" + stem + ".pgm";
        fs::create_directories(fs::path(root) / "masks" / name);
        write_pgm(root + "/" + rel, mask);
        rec.masks[name] = rel;
        rec.categories.push_back(name);
    }
    std::sort(rec.categories.begin(), rec.categories.end());
    return rec;
}

} // namespace

DatasetIndex build_splits(const DataGenConfig& cfg, const std::string& out_dir,
                          std::uint64_t seed) {
    cfg.validate();
    fs::create_directories(fs::path(out_dir) / "images");

    DatasetIndex index;
    index.root = out_dir;
    index.height = cfg.target_spec.height;
    index.width = cfg.target_spec.width;
    for (auto c : cfg.target_spec.categories) index.target_categories.push_back(to_string(c));
    for (auto c : cfg.open_spec.categories) index.open_categories.push_back(to_string(c));

    Rng master(seed);
    Rng rng_target = master.fork(1);
    Rng rng_ref = master.fork(2);
    Rng rng_open = master.fork(3);
    Rng rng_heldout = master.fork(4);

    for (int i = 0; i < cfg.counts.target; ++i)
        index.records.push_back(write_scene(out_dir, generate_scene(cfg.target_spec, rng_target),
                                            Split::Target, "target_" + zero_pad(i, 4)));

    // reference scenes: exactly one object of one category, K per category
    for (auto cat : cfg.target_spec.categories) {
        ShapeSceneSpec ref_spec = cfg.target_spec;
        ref_spec.categories = {cat};
        ref_spec.min_objects = 1;
        ref_spec.max_objects = 1;
        for (int k = 0; k < cfg.counts.k_references; ++k)
            index.records.push_back(
                write_scene(out_dir, generate_scene(ref_spec, rng_ref), Split::Reference,
                            "reference_" + to_string(cat) + "_" + zero_pad(k, 3)));
    }

    // open-source scenes: single object so the (image, mask) pair is unambiguous
    ShapeSceneSpec open_spec = cfg.open_spec;
    open_spec.min_objects = 1;
    open_spec.max_objects = 1;
    for (int i = 0; i < cfg.counts.open_source; ++i)
        index.records.push_back(write_scene(out_dir, generate_scene(open_spec, rng_open),
                                            Split::OpenSource, "open_" + zero_pad(i, 4)));

    for (int i = 0; i < cfg.counts.heldout; ++i)
        index.records.push_back(write_scene(out_dir, generate_scene(cfg.target_spec, rng_heldout),
                                            Split::Heldout, "heldout_" + zero_pad(i, 4)));

    save_index(index, out_dir);
    return index;
}

void save_index(const DatasetIndex& index, const std::string& dir) {
    json meta{{"height", index.height},
              {"width", index.width},
              {"target_categories", index.target_categories},
              {"open_categories", index.open_categories}};
    std::ofstream meta_out(dir + "/meta.json");
    meta_out << meta.dump(2) << "\n";

    std::ofstream out(dir + "/index.jsonl");
    if (!out) throw std::runtime_error("save_index: cannot open " + dir + "/index.jsonl");
    for (const auto& rec : index.records) {
        json j{{"path", rec.image_path},
               {"masks", rec.masks},
               {"categories", rec.categories},
               {"split", to_string(rec.split)}};
        out << j.dump() << "\n";
    }
}

DatasetIndex load_index(const std::string& dir) {
    DatasetIndex index;
    index.root = dir;
    std::ifstream meta_in(dir + "/meta.json");
    if (!meta_in) throw std::runtime_error("load_index: cannot open " + dir + "/meta.json");
    json meta = json::parse(meta_in);
    index.height = meta.at("height").get<int>();
    index.width = meta.at("width").get<int>();
    index.target_categories = meta.at("target_categories").get<std::vector<std::string>>();
    index.open_categories = meta.at("open_categories").get<std::vector<std::string>>();

    std::ifstream in(dir + "/index.jsonl");
    if (!in) throw std::runtime_error("load_index: cannot open " + dir + "/index.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        DatasetRecord rec;
        rec.image_path = j.at("path").get<std::string>();
        rec.masks = j.at("masks").get<std::map<std::string, std::string>>();
        rec.categories = j.at("categories").get<std::vector<std::string>>();
        rec.split = split_from_string(j.at("split").get<std::string>());
        index.records.push_back(std::move(rec));
    }
    return index;
}

Image DatasetReader::load_image(const DatasetRecord& rec) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = image_cache_.find(rec.image_path);
    if (it != image_cache_.end()) return it->second;
    Image img = read_ppm(index_->root + "/" + rec.image_path);
    image_cache_[rec.image_path] = img;
    return img;
}

BinaryMask DatasetReader::load_mask(const DatasetRecord& rec, const std::string& category) const {
    std::lock_guard<std::mutex> lock(mu_);
    ++mask_reads_[rec.split];
    auto mit = rec.masks.find(category);
    if (mit == rec.masks.end())
        throw std::invalid_argument("load_mask: record has no mask for category " + category);
    auto it = mask_cache_.find(mit->second);
    if (it != mask_cache_.end()) return it->second;
    BinaryMask mask = read_pgm_binary(index_->root + "/" + mit->second);
    mask_cache_[mit->second] = mask;
    return mask;
}

std::map<Split, int> DatasetReader::mask_read_counts() const {
    std::lock_guard<std::mutex> lock(mu_);
    return mask_reads_;
}

void DatasetReader::reset_audit() {
    std::lock_guard<std::mutex> lock(mu_);
    mask_reads_.clear();
}

std::pair<Image, BinaryMask> augment(const Image& image, const BinaryMask& mask, Rng& rng,
                                     const AugmentPolicy& policy) {
    if (image.height != mask.height || image.width != mask.width)
        throw std::invalid_argument("augment: image/mask shape mismatch");
    if (!policy.enabled) return {image, mask};

    const AffineTransform A = sample_affine(rng, policy.geometry, image.height, image.width);
    Image out_img = apply_affine(image, A, Interp::Bilinear);
    BinaryMask out_mask = apply_affine(mask, A);

    const float b = static_cast<float>(rng.uniform(-policy.brightness_delta, policy.brightness_delta));
    const float c = 1.f + static_cast<float>(rng.uniform(-policy.contrast_delta, policy.contrast_delta));
    if (b != 0.f || c != 1.f)
        for (auto& v : out_img.data) v = std::clamp(0.5f + c * (v - 0.5f) + b, 0.f, 1.f);
    return {std::move(out_img), std::move(out_mask)};
}

} // namespace refnet
