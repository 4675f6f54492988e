#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lulc {

using Rgb = std::array<std::uint8_t, 3>;

struct ClassPalette {
  std::vector<std::string> labels;
  std::vector<Rgb> colors;

  int num_classes() const { return static_cast<int>(labels.size()); }

  // Throws UsageError unless K >= 2, labels are unique and colors match.
  void validate() const;
};

// The 20-class NLCD legend in product order. Indices 2..5 are the developed
// classes and index 0 is open water.
const ClassPalette& nlcd_palette();

// NLCD palette for K == 20, otherwise a generic K-entry palette.
ClassPalette make_palette(int num_classes);

inline constexpr int kOpenWaterClass = 0;
inline constexpr std::array<int, 4> kDevelopedClasses = {2, 3, 4, 5};

// H x W grid of class indices, row-major.
class CategoricalRaster {
 public:
  CategoricalRaster() = default;
  CategoricalRaster(int height, int width, int num_classes, std::uint8_t fill = 0);
  CategoricalRaster(int height, int width, int num_classes, std::vector<std::uint8_t> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t at(int r, int c) const { return data_[index(r, c)]; }
  void set(int r, int c, std::uint8_t v);
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }

  std::span<const std::uint8_t> data() const { return data_; }

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c);
  }

  CategoricalRaster crop(int row, int col, int height, int width) const;

  bool operator==(const CategoricalRaster&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<std::uint8_t> data_;
};

// true = pixel value is known.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(int height, int width, bool observed);
  PixelMask(int height, int width, std::vector<std::uint8_t> observed);

  static PixelMask all_observed(int h, int w) { return {h, w, true}; }
  static PixelMask all_missing(int h, int w) { return {h, w, false}; }
  // Observed everywhere except the rectangle [row, row+h) x [col, col+w).
  static PixelMask with_hole(int height, int width, int row, int col, int h, int w);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return observed_.size(); }

  bool observed(int r, int c) const { return observed_[index(r, c)] != 0; }
  bool observed(std::size_t i) const { return observed_[i] != 0; }
  void set(int r, int c, bool v) { observed_[index(r, c)] = v ? 1 : 0; }
  void set(std::size_t i, bool v) { observed_[i] = v ? 1 : 0; }

  std::span<const std::uint8_t> data() const { return observed_; }
  std::size_t count_missing() const;

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c);
  }

  PixelMask crop(int row, int col, int height, int width) const;

  bool operator==(const PixelMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> observed_;
};

void require_same_shape(const CategoricalRaster& raster, const PixelMask& mask);

}  // namespace lulc
