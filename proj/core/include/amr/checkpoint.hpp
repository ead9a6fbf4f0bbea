// SPDX-License-Identifier: Apache-2.0
#ifndef AMR_CHECKPOINT_HPP
#define AMR_CHECKPOINT_HPP

#include <optional>
#include <string>

#include "amr/adam.hpp"
#include "amr/model.hpp"
#include "amr/pruning.hpp"

namespace amr {

// .pcgd checkpoint: magic "PCGD", u32 version, u32 manifest byte
// length, JSON manifest (model spec + tensor table of name / shape /
// byte offset / prunable flag), then one blob of little-endian 32-bit
// floats concatenated in manifest order. Optimizer moments and pruning
// masks ride along as extra tensors under the "adam/" and "mask/" name
// prefixes.

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

void save_checkpoint(const std::string& path, const Model& model,
                     const AdamState* optimizer = nullptr,
                     const MaskSet* masks = nullptr);

struct LoadedCheckpoint {
  Model model;
  std::optional<AdamState> optimizer;
  std::optional<MaskSet> masks;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

/// Loads and validates the stored spec against `expect`; throws
/// ConfigError on mismatch.
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const ModelSpec& expect);

}  // namespace amr

#endif  // AMR_CHECKPOINT_HPP
