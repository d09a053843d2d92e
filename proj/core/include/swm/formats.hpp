#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swm/dataset.hpp"
#include "swm/errors.hpp"
#include "swm/evaluation.hpp"
#include "swm/geometry.hpp"
#include "swm/pipeline.hpp"

namespace swm {

inline constexpr std::uint32_t kTractogramFormatVersion = 1;
inline constexpr std::uint32_t kHeatmapFormatVersion = 1;

/// Tractogram layout (little-endian):
///
///   "SWMT" | version u32 | streamline count u64
///   per streamline: point count u32 | f32 x 3 per point (R, A, S in mm)
std::vector<std::uint8_t> serialize_tractogram(std::span<const Streamline> streamlines);
std::vector<Streamline> deserialize_tractogram(std::span<const std::uint8_t> bytes);
void save_tractogram(const std::string& path, std::span<const Streamline> streamlines);
std::vector<Streamline> load_tractogram(const std::string& path);

/// Heatmap layout: "SWMH" | version u32 | origin f32 x 3 | voxel size f32 |
/// dims u32 x 3 | f32 per voxel, x fastest.
std::vector<std::uint8_t> serialize_heatmap(const Heatmap& map);
Heatmap deserialize_heatmap(std::span<const std::uint8_t> bytes);
void save_heatmap(const std::string& path, const Heatmap& map);
Heatmap load_heatmap(const std::string& path);
/// Nonzero voxels only: `i,j,k,value`.
void save_heatmap_csv(const std::string& path, const Heatmap& map);

/// `index,label` with integer class ids.
void save_labels(const std::string& path, std::span<const std::uint32_t> labels);
std::vector<std::uint32_t> load_labels(const std::string& path);

/// `index,label` with cluster ids or the token NON_SWM.
void save_final_labels(const std::string& path, std::span<const std::int32_t> labels);
std::vector<std::int32_t> load_final_labels(const std::string& path);

/// `index,stage_one,stage_two,label`; stage_two is empty for DWM.
void save_extended_labels(const std::string& path, const ParcellationResult& result);

/// A dataset is a tractogram plus an integer label file of equal length.
/// Without `num_classes` the class count is one past the largest label.
void save_dataset(const std::string& tractogram_path, const std::string& labels_path, const LabeledDataset& data);
LabeledDataset load_dataset(const std::string& tractogram_path, const std::string& labels_path,
                            std::optional<std::uint32_t> num_classes = std::nullopt);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace swm
