#pragma once

#include <string>

#include "refnet/dataset.hpp"
#include "refnet/evaluate.hpp"
#include "refnet/trainer.hpp"

namespace refnet {

/// Whole-application configuration mirrored by the JSON config file. Every
/// field is optional in the file and falls back to these defaults; unknown
/// keys are rejected; parse(serialize(x)) == parse(x).
struct AppConfig {
    DataGenConfig data;
    TrainConfig train;
    EvalConfig eval;

    bool operator==(const AppConfig&) const;
};

AppConfig default_app_config();

AppConfig parse_config_text(const std::string& text);
std::string serialize_config(const AppConfig& cfg);

AppConfig load_config_file(const std::string& path);

/// Maps an ablation name (self, cond, pseu, inner, outer, dice; disc =
/// inner+outer) onto the toggle set. Throws with the valid list on unknown
/// names.
void apply_ablation(AblationToggles& toggles, const std::string& name);
std::vector<std::string> ablation_names(const AblationToggles& toggles);

} // namespace refnet
