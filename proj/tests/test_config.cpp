#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "refnet/config.hpp"

using namespace refnet;

TEST_CASE("defaults carry the published hyperparameters") {
    const AppConfig cfg = default_app_config();
    CHECK(cfg.train.weights.tau == 1.0);
    CHECK(cfg.train.weights.lambda_gp == 10.0);
    CHECK(cfg.train.weights.xi == 1.0);
    CHECK(cfg.train.weights.zeta == 1.0);
    CHECK(cfg.train.weights.eta == 1.0);
    CHECK(cfg.train.n_critic == 5);
    CHECK(cfg.train.batch == 64);
    CHECK(cfg.train.lr == 1e-4);
    CHECK(cfg.train.critic_beta1 == 0.0);
    CHECK(cfg.train.critic_beta2 == 0.9);
    CHECK(cfg.train.k_references == 10);
    // disjoint default category sets
    for (auto t : cfg.data.target_spec.categories)
        for (auto o : cfg.data.open_spec.categories) CHECK(t != o);
}

TEST_CASE("round trip: parse(serialize(parse(x))) == parse(x)") {
    const std::string text = R"({
      "data": {"height": 32, "width": 32, "target_categories": ["circle"],
               "open_categories": ["star", "ring"], "k_references": 3},
      "train": {"seed": 9, "max_iterations": 17, "ablations": ["self", "inner"],
                "arch": {"depth": 2, "base_width": 8}},
      "eval": {"threshold": 0.4}
    })";
    const AppConfig a = parse_config_text(text);
    CHECK(a.data.target_spec.height == 32);
    CHECK(a.train.seed == 9);
    CHECK(a.train.max_iterations == 17);
    CHECK_FALSE(a.train.toggles.self_supervision);
    CHECK_FALSE(a.train.toggles.inner_critic);
    CHECK(a.train.toggles.outer_critic);
    CHECK(a.train.arch.depth == 2);
    CHECK(a.eval.threshold == 0.4f);

    const AppConfig b = parse_config_text(serialize_config(a));
    CHECK(a == b);
    CHECK(serialize_config(a) == serialize_config(b));

    // defaults round-trip too
    const AppConfig d = default_app_config();
    CHECK(parse_config_text(serialize_config(d)) == d);
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_config_text(R"({"banana": 1})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text(R"({"train": {"lr_segmenter": 0.1}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text(R"({"data": {"hieght": 64}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text(R"({"train": {"arch": {"depht": 3}}})"),
                    std::invalid_argument);
}

TEST_CASE("ablation names") {
    AblationToggles t;
    apply_ablation(t, "dice");
    CHECK_FALSE(t.dice_supervision);
    apply_ablation(t, "disc");
    CHECK_FALSE(t.inner_critic);
    CHECK_FALSE(t.outer_critic);
    CHECK_THROWS_AS(apply_ablation(t, "bogus"), std::invalid_argument);

    AblationToggles all_off;
    apply_ablation(all_off, "self");
    apply_ablation(all_off, "cond");
    apply_ablation(all_off, "pseu");
    apply_ablation(all_off, "inner");
    apply_ablation(all_off, "outer");
    apply_ablation(all_off, "dice");
    const auto names = ablation_names(all_off);
    CHECK(names == std::vector<std::string>{"self", "cond", "pseu", "inner", "outer", "dice"});
}
