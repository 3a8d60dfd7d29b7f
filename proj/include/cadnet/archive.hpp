#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cadnet/model.hpp"

namespace cadnet {

/// CRC-32 (IEEE 802.3, reflected, init/final 0xFFFFFFFF). Check value:
/// crc32("123456789") == 0xCBF43926.
std::uint32_t crc32(std::span<const std::uint8_t> data);

/// Weight archive, little-endian throughout:
///   magic "NNWA", u32 version=1, u32 layer_count;
///   per layer: u16 name_len, UTF-8 name, u8 tensor_count;
///   per tensor: u8 rank, u64 x rank dims, IEEE-754 32-bit values row-major;
///   trailing u32 CRC32 of all preceding bytes.
/// Layers without parameters appear with tensor_count 0 so record order
/// mirrors the model's layer order.
inline constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> encode_weights(Model<float>& model);

/// Parses and fully validates the byte stream against the model's layers
/// (names, tensor counts, shapes, checksum) before a single value is
/// assigned, so a failed load leaves the model untouched. Throws
/// ArchiveError naming the offending layer on mismatch.
void decode_weights_into(Model<float>& model,
                         std::span<const std::uint8_t> bytes);

void save_weights(Model<float>& model, const std::filesystem::path& path);
void load_weights(Model<float>& model, const std::filesystem::path& path);

/// Convenience: build from the spec (zero-initialized) and fill from the
/// archive.
Model<float> load_model(const ModelSpec& spec,
                        const std::filesystem::path& path);

}  // namespace cadnet
