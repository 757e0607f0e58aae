#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "ttpp/config.hpp"
#include "ttpp/parameter.hpp"

namespace ttpp {

// Checkpoint layout, little-endian:
//   "TTPPCKPT"  u16 version  u32 parameter_count
//   per parameter: u32 name_len, name bytes, u32 rank, u32 extents[rank],
//                  f64 values[product(extents)]

inline constexpr std::string_view kCheckpointMagic = "TTPPCKPT";
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params);
/// Overwrites values in `params`; names and shapes must match exactly.
void decode_checkpoint(std::span<const std::uint8_t> bytes, ParameterSet& params);

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
void load_checkpoint(const std::filesystem::path& path, ParameterSet& params);

/// JSON manifest describing a run: configuration, seed, parameter shapes and
/// checksum. Contains no timestamps so identical runs give identical bytes.
std::string run_manifest(const RunConfig& config, const ParameterSet& params);

}  // namespace ttpp
