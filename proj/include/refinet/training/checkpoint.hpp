#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   "RFNT"                      magic
//   u32                         format version
//   u64 + bytes                 canonical JSON: configs, step, k_t, optimizer counters
//   u32                         manifest entry count
//   per entry: u32 name length, name, u32 n, c, h, w, u64 byte offset
//   raw f32 buffers             offsets are relative to the start of this section
//
// Entries hold every parameter of both networks followed by the Adam
// moment buffers ("adam_d.m:<param>", "adam_d.s:<param>", ...).

#include <cstdint>
#include <filesystem>

#include "refinet/training/trainer.hpp"

namespace refinet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Written to a temporary file first and renamed into place.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

/// Throws CheckpointError on bad magic, version, truncation or any shape
/// disagreement with the models the stored config describes.
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace refinet
