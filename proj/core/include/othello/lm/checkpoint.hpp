#pragma once

#include <filesystem>
#include <string>

#include "othello/lm/model.hpp"

namespace othello::lm {

// Layout, all integers little-endian:
//   "OTHLM1"                      6 bytes
//   u32 n, then n bytes of UTF-8 JSON config
//   f32 parameters in parameter_layout() order
//   u32 CRC-32 (zlib polynomial) of every preceding byte
inline constexpr std::string_view kCheckpointMagic = "OTHLM1";
inline constexpr int kCheckpointFormatVersion = 1;

std::string serialize_checkpoint(const Model<float>& model);
// Throws CorruptCheckpoint for a bad magic, size mismatch, CRC mismatch,
// unreadable config or non-finite parameter.
Model<float> deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path);
// Throws Io when the file cannot be read.
Model<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace othello::lm
