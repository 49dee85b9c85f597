#include "refnet/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

using json = nlohmann::json;

namespace refnet {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<ShapeCategory> categories_from(const std::vector<std::string>& names) {
    std::vector<ShapeCategory> out;
    for (const auto& n : names) out.push_back(category_from_string(n));
    return out;
}

std::vector<std::string> category_names(const std::vector<ShapeCategory>& cats) {
    std::vector<std::string> out;
    for (auto c : cats) out.push_back(to_string(c));
    return out;
}

} // namespace

bool AppConfig::operator==(const AppConfig& o) const {
    return serialize_config(*this) == serialize_config(o);
}

AppConfig default_app_config() {
    AppConfig cfg;
    cfg.data.target_spec.categories = {ShapeCategory::Circle, ShapeCategory::Square,
                                       ShapeCategory::Triangle};
    cfg.data.open_spec.categories = {ShapeCategory::Cross, ShapeCategory::Star,
                                     ShapeCategory::Ring};
    cfg.train.batch = 64; // shrunk automatically at desk scale
    return cfg;
}

AppConfig parse_config_text(const std::string& text) {
    const json j = json::parse(text);
    AppConfig cfg = default_app_config();
    reject_unknown(j, {"data", "train", "eval"}, "top level");

    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown(d,
                       {"height", "width", "target_categories", "open_categories", "target_count",
                        "open_count", "heldout_count", "k_references", "min_objects",
                        "max_objects", "min_size_frac", "max_size_frac", "background_noise",
                        "min_color_contrast", "require_disjoint"},
                       "data");
        get_opt(d, "height", cfg.data.target_spec.height);
        get_opt(d, "width", cfg.data.target_spec.width);
        cfg.data.open_spec.height = cfg.data.target_spec.height;
        cfg.data.open_spec.width = cfg.data.target_spec.width;
        if (d.contains("target_categories"))
            cfg.data.target_spec.categories =
                categories_from(d.at("target_categories").get<std::vector<std::string>>());
        if (d.contains("open_categories"))
            cfg.data.open_spec.categories =
                categories_from(d.at("open_categories").get<std::vector<std::string>>());
        get_opt(d, "target_count", cfg.data.counts.target);
        get_opt(d, "open_count", cfg.data.counts.open_source);
        get_opt(d, "heldout_count", cfg.data.counts.heldout);
        get_opt(d, "k_references", cfg.data.counts.k_references);
        get_opt(d, "min_objects", cfg.data.target_spec.min_objects);
        get_opt(d, "max_objects", cfg.data.target_spec.max_objects);
        get_opt(d, "min_size_frac", cfg.data.target_spec.min_size_frac);
        get_opt(d, "max_size_frac", cfg.data.target_spec.max_size_frac);
        get_opt(d, "background_noise", cfg.data.target_spec.background_noise);
        get_opt(d, "min_color_contrast", cfg.data.target_spec.min_color_contrast);
        cfg.data.open_spec.min_size_frac = cfg.data.target_spec.min_size_frac;
        cfg.data.open_spec.max_size_frac = cfg.data.target_spec.max_size_frac;
        cfg.data.open_spec.background_noise = cfg.data.target_spec.background_noise;
        cfg.data.open_spec.min_color_contrast = cfg.data.target_spec.min_color_contrast;
        get_opt(d, "require_disjoint", cfg.data.require_disjoint);
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t,
                       {"tau", "lambda_gp", "xi", "zeta", "eta", "n_critic", "batch", "lr",
                        "seg_beta1", "seg_beta2", "critic_beta1", "critic_beta2",
                        "max_iterations", "seed", "ablations", "k_references", "arch", "critic",
                        "self_sup_radius", "neg_ratio", "labeled_ratio", "augment",
                        "checkpoint_every", "swap_alternation", "num_workers", "mmd_bandwidths"},
                       "train");
        get_opt(t, "tau", cfg.train.weights.tau);
        get_opt(t, "lambda_gp", cfg.train.weights.lambda_gp);
        get_opt(t, "xi", cfg.train.weights.xi);
        get_opt(t, "zeta", cfg.train.weights.zeta);
        get_opt(t, "eta", cfg.train.weights.eta);
        get_opt(t, "n_critic", cfg.train.n_critic);
        get_opt(t, "batch", cfg.train.batch);
        get_opt(t, "lr", cfg.train.lr);
        get_opt(t, "seg_beta1", cfg.train.seg_beta1);
        get_opt(t, "seg_beta2", cfg.train.seg_beta2);
        get_opt(t, "critic_beta1", cfg.train.critic_beta1);
        get_opt(t, "critic_beta2", cfg.train.critic_beta2);
        get_opt(t, "max_iterations", cfg.train.max_iterations);
        get_opt(t, "seed", cfg.train.seed);
        if (t.contains("ablations"))
            for (const auto& name : t.at("ablations").get<std::vector<std::string>>())
                apply_ablation(cfg.train.toggles, name);
        get_opt(t, "k_references", cfg.train.k_references);
        if (t.contains("arch")) {
            const json& a = t.at("arch");
            reject_unknown(a, {"depth", "base_width", "max_width", "norm_groups",
                               "spatial_condition"},
                           "train.arch");
            get_opt(a, "depth", cfg.train.arch.depth);
            get_opt(a, "base_width", cfg.train.arch.base_width);
            get_opt(a, "max_width", cfg.train.arch.max_width);
            get_opt(a, "norm_groups", cfg.train.arch.norm_groups);
            get_opt(a, "spatial_condition", cfg.train.arch.spatial_condition);
        }
        if (t.contains("critic")) {
            const json& c = t.at("critic");
            reject_unknown(c, {"base_width", "num_layers", "max_width", "leaky_slope"},
                           "train.critic");
            get_opt(c, "base_width", cfg.train.critic_arch.base_width);
            get_opt(c, "num_layers", cfg.train.critic_arch.num_layers);
            get_opt(c, "max_width", cfg.train.critic_arch.max_width);
            get_opt(c, "leaky_slope", cfg.train.critic_arch.leaky_slope);
        }
        get_opt(t, "self_sup_radius", cfg.train.self_sup_radius);
        get_opt(t, "neg_ratio", cfg.train.neg_ratio);
        get_opt(t, "labeled_ratio", cfg.train.labeled_ratio);
        get_opt(t, "augment", cfg.train.augment);
        get_opt(t, "checkpoint_every", cfg.train.checkpoint_every);
        get_opt(t, "swap_alternation", cfg.train.swap_alternation);
        get_opt(t, "num_workers", cfg.train.num_workers);
        if (t.contains("mmd_bandwidths")) {
            cfg.train.mmd.bandwidths = t.at("mmd_bandwidths").get<std::vector<double>>();
            cfg.train.mmd.median_heuristic = cfg.train.mmd.bandwidths.empty();
        }
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown(e, {"threshold", "average_references", "batch", "k_references"}, "eval");
        get_opt(e, "threshold", cfg.eval.threshold);
        get_opt(e, "average_references", cfg.eval.average_references);
        get_opt(e, "batch", cfg.eval.batch);
        get_opt(e, "k_references", cfg.eval.k_references);
    }
    return cfg;
}

std::string serialize_config(const AppConfig& cfg) {
    json j;
    j["data"] = {{"height", cfg.data.target_spec.height},
                 {"width", cfg.data.target_spec.width},
                 {"target_categories", category_names(cfg.data.target_spec.categories)},
                 {"open_categories", category_names(cfg.data.open_spec.categories)},
                 {"target_count", cfg.data.counts.target},
                 {"open_count", cfg.data.counts.open_source},
                 {"heldout_count", cfg.data.counts.heldout},
                 {"k_references", cfg.data.counts.k_references},
                 {"min_objects", cfg.data.target_spec.min_objects},
                 {"max_objects", cfg.data.target_spec.max_objects},
                 {"min_size_frac", cfg.data.target_spec.min_size_frac},
                 {"max_size_frac", cfg.data.target_spec.max_size_frac},
                 {"background_noise", cfg.data.target_spec.background_noise},
                 {"min_color_contrast", cfg.data.target_spec.min_color_contrast},
                 {"require_disjoint", cfg.data.require_disjoint}};
    j["train"] = {{"tau", cfg.train.weights.tau},
                  {"lambda_gp", cfg.train.weights.lambda_gp},
                  {"xi", cfg.train.weights.xi},
                  {"zeta", cfg.train.weights.zeta},
                  {"eta", cfg.train.weights.eta},
                  {"n_critic", cfg.train.n_critic},
                  {"batch", cfg.train.batch},
                  {"lr", cfg.train.lr},
                  {"seg_beta1", cfg.train.seg_beta1},
                  {"seg_beta2", cfg.train.seg_beta2},
                  {"critic_beta1", cfg.train.critic_beta1},
                  {"critic_beta2", cfg.train.critic_beta2},
                  {"max_iterations", cfg.train.max_iterations},
                  {"seed", cfg.train.seed},
                  {"ablations", ablation_names(cfg.train.toggles)},
                  {"k_references", cfg.train.k_references},
                  {"arch",
                   {{"depth", cfg.train.arch.depth},
                    {"base_width", cfg.train.arch.base_width},
                    {"max_width", cfg.train.arch.max_width},
                    {"norm_groups", cfg.train.arch.norm_groups},
                    {"spatial_condition", cfg.train.arch.spatial_condition}}},
                  {"critic",
                   {{"base_width", cfg.train.critic_arch.base_width},
                    {"num_layers", cfg.train.critic_arch.num_layers},
                    {"max_width", cfg.train.critic_arch.max_width},
                    {"leaky_slope", cfg.train.critic_arch.leaky_slope}}},
                  {"self_sup_radius", cfg.train.self_sup_radius},
                  {"neg_ratio", cfg.train.neg_ratio},
                  {"labeled_ratio", cfg.train.labeled_ratio},
                  {"augment", cfg.train.augment},
                  {"checkpoint_every", cfg.train.checkpoint_every},
                  {"swap_alternation", cfg.train.swap_alternation},
                  {"num_workers", cfg.train.num_workers},
                  {"mmd_bandwidths", cfg.train.mmd.bandwidths}};
    j["eval"] = {{"threshold", cfg.eval.threshold},
                 {"average_references", cfg.eval.average_references},
                 {"batch", cfg.eval.batch},
                 {"k_references", cfg.eval.k_references}};
    return j.dump(2);
}

AppConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

void apply_ablation(AblationToggles& toggles, const std::string& name) {
    if (name == "self") toggles.self_supervision = false;
    else if (name == "cond") toggles.condition = false;
    else if (name == "pseu") toggles.pseudo_triplet = false;
    else if (name == "inner") toggles.inner_critic = false;
    else if (name == "outer") toggles.outer_critic = false;
    else if (name == "dice") toggles.dice_supervision = false;
    else if (name == "disc") { toggles.inner_critic = false; toggles.outer_critic = false; }
    else
        throw std::invalid_argument("unknown ablation '" + name +
                                    "'; valid: self, cond, pseu, inner, outer, dice, disc");
}

std::vector<std::string> ablation_names(const AblationToggles& t) {
    std::vector<std::string> out;
    if (!t.self_supervision) out.push_back("self");
    if (!t.condition) out.push_back("cond");
    if (!t.pseudo_triplet) out.push_back("pseu");
    if (!t.inner_critic) out.push_back("inner");
    if (!t.outer_critic) out.push_back("outer");
    if (!t.dice_supervision) out.push_back("dice");
    return out;
}

} // namespace refnet
