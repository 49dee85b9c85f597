#pragma once

#include <string>

#include "refnet/trainer.hpp"

namespace refnet {

inline constexpr const char* kCheckpointMagic = "REFNET-CKPT-1";

/// Single binary blob: magic, JSON descriptor (architectures, optimizer
/// hyperparameters, iteration counter, RNG state), then parameter and Adam
/// state arrays for the segmenter and both critics.
void save_checkpoint(const std::string& path, const TrainState& state, const TrainConfig& cfg);

/// Rebuilds the networks from the stored descriptors and restores every
/// array; resuming from the result continues the original run exactly.
TrainState load_checkpoint(const std::string& path);

/// Human-readable one-line descriptor used in mismatch diagnostics.
std::string describe(const ArchConfig& arch);
std::string describe(const CriticConfig& cfg);

} // namespace refnet
