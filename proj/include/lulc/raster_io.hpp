#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lulc/raster.hpp"

namespace lulc {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kCrasVersion = 1;
inline constexpr std::size_t kCrasHeaderSize = 12;

// CRAS: "CRAS", version u8, flags u8, H u16 LE, W u16 LE, K u8, reserved u8,
// then H*W class bytes row-major.
Bytes encode_cras(const CategoricalRaster& raster);
CategoricalRaster decode_cras(std::span<const std::uint8_t> bytes);

// CMSK: same header with magic "CMSK", payload bytes in {0, 1}. K is written
// as 2 and ignored when reading.
Bytes encode_cmsk(const PixelMask& mask);
PixelMask decode_cmsk(std::span<const std::uint8_t> bytes);

// Binary P6 image, one palette color per cell.
Bytes export_ppm(const CategoricalRaster& raster, const ClassPalette& palette);

// Grayscale-to-color heat image of values in [lo, hi].
Bytes export_heat_ppm(std::span<const double> values, int height, int width, double lo, double hi);

struct PpmImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;
};
PpmImage decode_ppm(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
// Writes to a temporary sibling then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

CategoricalRaster load_raster(const std::filesystem::path& path);
PixelMask load_mask(const std::filesystem::path& path);
void save_raster(const std::filesystem::path& path, const CategoricalRaster& raster);
void save_mask(const std::filesystem::path& path, const PixelMask& mask);

}  // namespace lulc
