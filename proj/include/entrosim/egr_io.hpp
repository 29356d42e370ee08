#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "entrosim/entropy.hpp"

namespace entrosim {

// .egr layout (little-endian throughout):
//   "EGR1" | u32 H | u32 W | u8 fill_policy | u8[3] zero | f32[H*W] row-major
inline constexpr std::size_t kEgrHeaderSize = 16;

std::vector<std::uint8_t> encode_egr(const EntropyGraph& graph);

/// Throws FormatError on bad magic, unknown policy, non-zero reserved bytes
/// or a payload size that does not match H*W.
EntropyGraph decode_egr(std::span<const std::uint8_t> bytes);

void write_egr(const std::filesystem::path& path, const EntropyGraph& graph);
EntropyGraph read_egr(const std::filesystem::path& path);

}  // namespace entrosim
