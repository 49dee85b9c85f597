#include "refnet/sampler.hpp"

#include <cstdlib>
#include <future>

namespace refnet {

void SamplerConfig::validate() const {
    if (batch < 1) throw std::invalid_argument("SamplerConfig: batch must be >= 1");
    if (neg_ratio < 0.0 || neg_ratio > 1.0)
        throw std::invalid_argument("SamplerConfig: neg_ratio outside [0,1]");
    if (labeled_ratio < 0.0 || labeled_ratio > 1.0)
        throw std::invalid_argument("SamplerConfig: labeled_ratio outside [0,1]");
}

int resolve_num_workers(int requested) {
    if (const char* env = std::getenv("REFNET_NUM_WORKERS")) {
        const int cap = std::atoi(env);
        if (cap >= 0) requested = std::min(requested, cap);
    }
    return std::max(0, requested);
}

namespace {

int pick(Rng& rng, const std::vector<int>& pool) {
    if (pool.empty()) throw std::runtime_error("sample_training_batch: empty split");
    return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
}

// Deterministic plan first, parallel decode second: all randomness happens
// while choosing records, so worker count never changes the batch content.
struct PairPlan {
    int target_idx = -1;
    int ref_idx = -1;
    std::string category;
    bool negative = false;
    bool labeled = false;
};

} // namespace

TrainingBatch sample_training_batch(const DatasetIndex& index, const DatasetReader& reader,
                                    Rng& rng, const SamplerConfig& cfg) {
    cfg.validate();
    const std::vector<int> targets = index.by_split(Split::Target);
    const std::vector<int> opens = index.by_split(Split::OpenSource);
    if (targets.empty() || opens.empty())
        throw std::runtime_error("sample_training_batch: dataset is missing a split");

    std::map<std::string, std::vector<int>> refs;
    for (const auto& cat : index.target_categories) {
        auto r = index.references_of(cat, cfg.k_references);
        if (!r.empty()) refs[cat] = std::move(r);
    }
    if (refs.empty()) throw std::runtime_error("sample_training_batch: no reference records");

    std::vector<std::string> ref_cats;
    for (const auto& [cat, _] : refs) ref_cats.push_back(cat);

    // ---- plan ----
    std::vector<PairPlan> plans;
    for (int b = 0; b < cfg.batch; ++b) {
        PairPlan plan;
        const bool want_negative = rng.bernoulli(cfg.neg_ratio);
        if (want_negative) {
            // any target image + a reference category it does not contain
            for (int attempt = 0; attempt < 64 && plan.target_idx < 0; ++attempt) {
                const int t = pick(rng, targets);
                std::vector<std::string> absent;
                for (const auto& c : ref_cats)
                    if (!index.records[static_cast<std::size_t>(t)].has_category(c))
                        absent.push_back(c);
                if (absent.empty()) continue;
                plan.target_idx = t;
                plan.category = absent[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<int>(absent.size()) - 1))];
                plan.negative = true;
            }
        }
        if (plan.target_idx < 0) {
            plan.negative = false;
            plan.category = ref_cats[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(ref_cats.size()) - 1))];
            if (rng.bernoulli(cfg.labeled_ratio)) {
                plan.labeled = true;
                plan.target_idx = pick(rng, refs.at(plan.category));
            } else {
                // unlabeled target image containing the category
                for (int attempt = 0; attempt < 128 && plan.target_idx < 0; ++attempt) {
                    const int t = pick(rng, targets);
                    if (index.records[static_cast<std::size_t>(t)].has_category(plan.category))
                        plan.target_idx = t;
                }
                if (plan.target_idx < 0) { // rare category: fall back to a labeled pair
                    plan.labeled = true;
                    plan.target_idx = pick(rng, refs.at(plan.category));
                }
            }
        }
        plan.ref_idx = pick(rng, refs.at(plan.category));
        plans.push_back(plan);
    }
    std::vector<int> open_plan;
    for (int b = 0; b < cfg.batch; ++b) open_plan.push_back(pick(rng, opens));

    // ---- decode (optionally in parallel; results assembled in plan order) ----
    const int workers = resolve_num_workers(cfg.num_workers);
    if (workers > 1) {
        std::vector<std::future<void>> jobs;
        auto warm = [&](int rec_idx, bool with_masks) {
            const DatasetRecord& rec = index.records[static_cast<std::size_t>(rec_idx)];
            reader.load_image(rec);
            if (with_masks)
                for (const auto& c : rec.categories) reader.load_mask(rec, c);
        };
        for (const auto& p : plans) {
            jobs.push_back(std::async(std::launch::async, warm, p.target_idx, p.labeled));
            jobs.push_back(std::async(std::launch::async, warm, p.ref_idx, true));
            if (static_cast<int>(jobs.size()) >= 2 * workers) {
                for (auto& j : jobs) j.get();
                jobs.clear();
            }
        }
        for (int o : open_plan) jobs.push_back(std::async(std::launch::async, warm, o, true));
        for (auto& j : jobs) j.get();
    }

    TrainingBatch batch;
    for (const auto& p : plans) {
        const DatasetRecord& trec = index.records[static_cast<std::size_t>(p.target_idx)];
        const DatasetRecord& rrec = index.records[static_cast<std::size_t>(p.ref_idx)];
        PairSample s;
        s.category = p.category;
        s.negative = p.negative;
        s.target = reader.load_image(trec);
        s.ref_image = reader.load_image(rrec);
        s.ref_mask = reader.load_mask(rrec, p.category);
        if (p.negative) {
            s.gt = BinaryMask(index.height, index.width); // all-zero supervision target
            s.has_gt = true;
        } else if (p.labeled) {
            s.gt = reader.load_mask(trec, p.category);
            s.has_gt = true;
            auto aug = augment(s.target, s.gt, rng, cfg.augment);
            s.target = std::move(aug.first);
            s.gt = std::move(aug.second);
        }
        batch.pairs.push_back(std::move(s));
    }
    for (int o : open_plan) {
        const DatasetRecord& rec = index.records[static_cast<std::size_t>(o)];
        OpenSample s;
        s.category = rec.categories.at(0);
        s.image = reader.load_image(rec);
        s.mask = reader.load_mask(rec, s.category);
        batch.open.push_back(std::move(s));
    }
    return batch;
}

} // namespace refnet
