#include "lulc/raster.hpp"

#include <algorithm>
#include <set>

#include "lulc/error.hpp"

namespace lulc {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::BadMagic: return "bad-magic";
    case FormatErrorKind::BadVersion: return "bad-version";
    case FormatErrorKind::TruncatedPayload: return "truncated-payload";
    case FormatErrorKind::ClassIndexOutOfRange: return "class-index-out-of-range";
    case FormatErrorKind::DimensionMismatch: return "dimension-mismatch";
    case FormatErrorKind::NotDivisible: return "dimension-not-divisible";
    case FormatErrorKind::Infeasible: return "infeasible";
    case FormatErrorKind::Io: return "io";
    case FormatErrorKind::Other: return "format";
  }
  return "format";
}

void ClassPalette::validate() const {
  if (labels.size() < 2) throw UsageError("palette needs at least 2 classes");
  if (colors.size() != labels.size()) throw UsageError("palette colors/labels length mismatch");
  std::set<std::string> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw UsageError("palette labels must be unique");
}

const ClassPalette& nlcd_palette() {
  static const ClassPalette palette{
      {"open_water", "ice_snow", "developed_open", "developed_low", "developed_medium",
       "developed_high", "barren", "deciduous_forest", "evergreen_forest", "mixed_forest",
       "dwarf_scrub", "shrub_scrub", "grassland", "sedge", "lichens", "moss", "pasture",
       "cultivated_crops", "woody_wetlands", "emergent_wetlands"},
      {Rgb{70, 107, 159}, Rgb{209, 222, 248}, Rgb{222, 197, 197}, Rgb{217, 146, 130},
       Rgb{235, 0, 0}, Rgb{171, 0, 0}, Rgb{179, 172, 159}, Rgb{104, 171, 95},
       Rgb{28, 95, 44}, Rgb{181, 197, 143}, Rgb{172, 146, 57}, Rgb{204, 184, 121},
       Rgb{223, 223, 194}, Rgb{209, 209, 130}, Rgb{163, 204, 81}, Rgb{130, 186, 158},
       Rgb{220, 217, 57}, Rgb{171, 108, 40}, Rgb{184, 217, 235}, Rgb{108, 159, 184}}};
  return palette;
}

ClassPalette make_palette(int num_classes) {
  if (num_classes < 2 || num_classes > 256) throw UsageError("palette size must be in [2, 256]");
  if (num_classes == 20) return nlcd_palette();
  // Water, forest, crops, developed, grassland first so small synthetic
  // landscapes read naturally; further classes get hue-rotated colors.
  static const std::vector<Rgb> base = {Rgb{70, 107, 159},  Rgb{104, 171, 95}, Rgb{171, 108, 40},
                                        Rgb{235, 0, 0},     Rgb{223, 223, 194}, Rgb{28, 95, 44},
                                        Rgb{220, 217, 57},  Rgb{184, 217, 235}, Rgb{179, 172, 159},
                                        Rgb{217, 146, 130}};
  ClassPalette p;
  for (int k = 0; k < num_classes; ++k) {
    p.labels.push_back("class_" + std::to_string(k));
    if (k < static_cast<int>(base.size())) {
      p.colors.push_back(base[static_cast<std::size_t>(k)]);
    } else {
      const auto h = static_cast<unsigned>(k * 47);
      p.colors.push_back(Rgb{static_cast<std::uint8_t>(h * 3 % 256), static_cast<std::uint8_t>(h * 7 % 256),
                             static_cast<std::uint8_t>(h * 11 % 256)});
    }
  }
  return p;
}

namespace {

void check_dims(int h, int w) {
  if (h <= 0 || w <= 0 || h > 65535 || w > 65535)
    throw FormatError(FormatErrorKind::DimensionMismatch,
                      "raster dimensions must be in [1, 65535], got " + std::to_string(h) + "x" + std::to_string(w));
}

}  // namespace

CategoricalRaster::CategoricalRaster(int height, int width, int num_classes, std::uint8_t fill)
    : height_(height), width_(width), num_classes_(num_classes) {
  check_dims(height, width);
  if (num_classes < 1 || num_classes > 256) throw UsageError("K must be in [1, 256]");
  if (fill >= num_classes)
    throw FormatError(FormatErrorKind::ClassIndexOutOfRange, "fill value exceeds K");
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

CategoricalRaster::CategoricalRaster(int height, int width, int num_classes, std::vector<std::uint8_t> data)
    : height_(height), width_(width), num_classes_(num_classes), data_(std::move(data)) {
  check_dims(height, width);
  if (num_classes < 1 || num_classes > 256) throw UsageError("K must be in [1, 256]");
  if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw FormatError(FormatErrorKind::DimensionMismatch, "data length does not equal H*W");
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (data_[i] >= num_classes)
      throw FormatError(FormatErrorKind::ClassIndexOutOfRange,
                        "value " + std::to_string(data_[i]) + " at index " + std::to_string(i) +
                            " >= K=" + std::to_string(num_classes));
}

void CategoricalRaster::set(int r, int c, std::uint8_t v) {
  if (v >= num_classes_)
    throw FormatError(FormatErrorKind::ClassIndexOutOfRange, "class " + std::to_string(v) + " >= K");
  data_[index(r, c)] = v;
}

CategoricalRaster CategoricalRaster::crop(int row, int col, int height, int width) const {
  if (row < 0 || col < 0 || row + height > height_ || col + width > width_)
    throw FormatError(FormatErrorKind::DimensionMismatch, "crop outside raster");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (int r = 0; r < height; ++r)
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(index(row + r, col)), width,
                out.begin() + static_cast<std::ptrdiff_t>(r) * width);
  return {height, width, num_classes_, std::move(out)};
}

PixelMask::PixelMask(int height, int width, bool observed) : height_(height), width_(width) {
  check_dims(height, width);
  observed_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), observed ? 1 : 0);
}

PixelMask::PixelMask(int height, int width, std::vector<std::uint8_t> observed)
    : height_(height), width_(width), observed_(std::move(observed)) {
  check_dims(height, width);
  if (observed_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw FormatError(FormatErrorKind::DimensionMismatch, "mask length does not equal H*W");
  for (auto v : observed_)
    if (v > 1) throw FormatError(FormatErrorKind::ClassIndexOutOfRange, "mask bytes must be 0 or 1");
}

PixelMask PixelMask::with_hole(int height, int width, int row, int col, int h, int w) {
  PixelMask m(height, width, true);
  for (int r = std::max(row, 0); r < std::min(row + h, height); ++r)
    for (int c = std::max(col, 0); c < std::min(col + w, width); ++c) m.set(r, c, false);
  return m;
}

std::size_t PixelMask::count_missing() const {
  return static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), std::uint8_t{0}));
}

PixelMask PixelMask::crop(int row, int col, int height, int width) const {
  if (row < 0 || col < 0 || row + height > height_ || col + width > width_)
    throw FormatError(FormatErrorKind::DimensionMismatch, "crop outside mask");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (int r = 0; r < height; ++r)
    std::copy_n(observed_.begin() + static_cast<std::ptrdiff_t>(index(row + r, col)), width,
                out.begin() + static_cast<std::ptrdiff_t>(r) * width);
  return {height, width, std::move(out)};
}

void require_same_shape(const CategoricalRaster& raster, const PixelMask& mask) {
  if (raster.height() != mask.height() || raster.width() != mask.width())
    throw FormatError(FormatErrorKind::DimensionMismatch,
                      "mask " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                          " does not match raster " + std::to_string(raster.height()) + "x" +
                          std::to_string(raster.width()));
}

}  // namespace lulc
