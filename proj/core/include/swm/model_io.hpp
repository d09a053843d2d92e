#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swm/errors.hpp"
#include "swm/network.hpp"

namespace swm {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary model layout (little-endian):
///
///   "SWMM" | version u32 | stage u8 | n u32 | k u32 | block count u32
///   per block: name length u16 | name | rank u8 | dims u32 x rank | f32 payload
///
/// Weights are stored as 32-bit floats, so a round trip is exact for any
/// model that has passed through quantize() first.
std::vector<std::uint8_t> serialize_model(const Model& model);

/// Parses a model. When `expected` is given, every block must have the
/// shape that architecture implies; the first mismatch raises
/// ShapeMismatchError naming the block.
Model deserialize_model(std::span<const std::uint8_t> bytes, const Architecture* expected = nullptr);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path, const Architecture* expected = nullptr);

/// Rounds every parameter and statistic to the nearest 32-bit float.
Model quantize(const Model& model);

}  // namespace swm
