#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "eyedrive/nn/network.hpp"

namespace eyedrive::nn {

inline constexpr std::uint16_t kWeightFormatVersion = 1;

/// Weight file layout (all integers little-endian), see docs/weight-format.md:
///   "GZNN" | u16 version | u16 layer count | u8 input rank | u32 extents...
///   per layer: u8 kind | u8 extent count | u32 extents... | u32 value count | f32 values...
std::vector<std::uint8_t> serialize_network(const Network& net);
Network deserialize_network(std::span<const std::uint8_t> bytes);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace eyedrive::nn
