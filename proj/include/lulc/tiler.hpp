#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lulc/sampler.hpp"

namespace lulc {

struct TileStep {
  int row = 0;  // window origin
  int col = 0;
  int height = 0;  // window extent after clipping at the bottom/right border
  int width = 0;
  PixelMask sub_mask;  // window-sized; false = filled by this step
};

struct TilePlan {
  int window = 0;
  int margin = 0;
  std::vector<TileStep> steps;
};

// Greedy cover: take the top-most (then left-most) missing pixel, open a
// window with up to `margin` pixels of context above and to the left, and
// assign every still-missing pixel inside it to this step.
TilePlan plan(const PixelMask& mask, int window, int margin);

struct TileRunOptions {
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool flips = true;
};

CategoricalRaster run(const TilePlan& plan, const PixelConstrainedCnn<float>& model, const CategoricalRaster& raster,
                      const PixelMask& mask, const TileRunOptions& options);

// `count` independent tiled completions, completion c seeded with seed + c.
std::vector<CategoricalRaster> run_many(const TilePlan& plan, const PixelConstrainedCnn<float>& model,
                                        const CategoricalRaster& raster, const PixelMask& mask,
                                        const TileRunOptions& options, int count, int workers = 0);

struct ProbabilityMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::vector<int> classes;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)]; }
};

ProbabilityMap probability_map(std::span<const CategoricalRaster> completions, std::span<const int> classes);

inline ProbabilityMap probability_map(std::span<const CategoricalRaster> completions) {
  return probability_map(completions, std::span<const int>(kDevelopedClasses));
}

}  // namespace lulc
