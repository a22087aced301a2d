#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>

#include "vufold/volume.hpp"

namespace vufold {

// GVOL on-disk layout, all fields little-endian:
//   "GVOL" | u32 version (1) | u8 dtype | u32 nx, ny, nz | f64 sx, sy, sz | payload
// dtype 0 is int16 intensity, dtype 1 is uint8 label. Payload is x-fastest.
inline constexpr std::uint32_t kGvolVersion = 1;
inline constexpr std::size_t kGvolHeaderSize = 4 + 4 + 1 + 3 * 4 + 3 * 8;

enum class VolumeDtype : std::uint8_t { kInt16 = 0, kUint8 = 1 };

using AnyVolume = std::variant<ScalarVolume, LabelVolume>;

AnyVolume read_volume(const std::filesystem::path& path);
ScalarVolume read_scalar_volume(const std::filesystem::path& path);
LabelVolume read_label_volume(const std::filesystem::path& path);

void write_volume(const ScalarVolume& volume, const std::filesystem::path& path);
void write_volume(const LabelVolume& volume, const std::filesystem::path& path);

// In-memory encode/decode used by the file functions.
std::vector<std::uint8_t> encode_volume(const ScalarVolume& volume);
std::vector<std::uint8_t> encode_volume(const LabelVolume& volume);
AnyVolume decode_volume(std::span<const std::uint8_t> bytes);

}  // namespace vufold
