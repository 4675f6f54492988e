#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lulc/raster.hpp"

namespace lulc {

// Each output pixel is the modal class of its factor x factor block; ties go
// to the lowest class index.
CategoricalRaster coarsen_majority(const CategoricalRaster& raster, int factor);

struct ManifestEntry {
  int source_id = 0;
  int row_offset = 0;
  int column_offset = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  int window_size = 0;
  int K = 0;
  std::vector<ManifestEntry> entries;
  int water_class = kOpenWaterClass;
  double water_fraction_limit = 0.5;

  bool operator==(const DatasetManifest&) const = default;
};

void to_json(nlohmann::json& j, const ManifestEntry& e);
void from_json(const nlohmann::json& j, ManifestEntry& e);
void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

struct WindowSpec {
  int window = 40;
  int count = 1;
  int water_class = kOpenWaterClass;
  double water_limit = 0.5;
  std::uint64_t seed = 0;
  int max_consecutive_rejections = 10000;
};

struct WindowSet {
  DatasetManifest manifest;
  std::vector<CategoricalRaster> windows;
};

double class_fraction(const CategoricalRaster& raster, int cls);

// Samples `count` windows uniformly over (source, row, column) offsets and
// rejects any whose water fraction exceeds the limit.
WindowSet extract_windows(std::span<const CategoricalRaster> sources, const WindowSpec& spec);
WindowSet extract_windows(const CategoricalRaster& raster, const WindowSpec& spec);

}  // namespace lulc
