#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gfmate/gcn.hpp"
#include "gfmate/prompt.hpp"

namespace gfmate {

// Checkpoint layout (little-endian):
//   magic[4] | u32 version | u32 shape fields... | f64 payload | u32 crc32
// The CRC covers every preceding byte.
//
// Encoder:  "GFMP", version, L, d, L·d·d weights (row-major, layer by layer)
// Prompts:  "GFMQ", version, L+1, C, d, (L+1)·C·d offsets, (L+1) layer weights

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_params(const GcnParams& params, const std::filesystem::path& path);
GcnParams load_params(const std::filesystem::path& path);

void save_prompts(const Prompts& prompts, const std::filesystem::path& path);
Prompts load_prompts(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace gfmate
