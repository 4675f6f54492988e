#include "lulc/tiler.hpp"

#include <omp.h>

#include "lulc/rng.hpp"

namespace lulc {

TilePlan plan(const PixelMask& mask, int window, int margin) {
  if (window < 1) throw UsageError("tiler: window must be positive");
  if (margin < 0 || margin >= window) throw UsageError("tiler: margin must be in [0, window)");
  if (window > mask.height() || window > mask.width())
    throw UsageError("tiler: window " + std::to_string(window) + " is larger than the raster");
  TilePlan out{window, margin, {}};
  PixelMask remaining = mask;
  const int H = mask.height(), W = mask.width();
  std::size_t cursor = 0;
  while (true) {
    while (cursor < remaining.size() && remaining.observed(cursor)) ++cursor;
    if (cursor == remaining.size()) break;
    const int r = static_cast<int>(cursor / static_cast<std::size_t>(W));
    const int c = static_cast<int>(cursor % static_cast<std::size_t>(W));
    TileStep step;
    step.row = std::max(0, r - margin);
    step.col = std::max(0, c - margin);
    step.height = std::min(window, H - step.row);
    step.width = std::min(window, W - step.col);
    step.sub_mask = PixelMask::all_observed(step.height, step.width);
    for (int y = 0; y < step.height; ++y)
      for (int x = 0; x < step.width; ++x)
        if (!remaining.observed(step.row + y, step.col + x)) {
          step.sub_mask.set(y, x, false);
          remaining.set(step.row + y, step.col + x, true);
        }
    out.steps.push_back(std::move(step));
  }
  return out;
}

CategoricalRaster run(const TilePlan& tile_plan, const PixelConstrainedCnn<float>& model,
                      const CategoricalRaster& raster, const PixelMask& mask, const TileRunOptions& options) {
  require_same_shape(raster, mask);
  CategoricalRaster current = raster;
  for (std::size_t s = 0; s < tile_plan.steps.size(); ++s) {
    const TileStep& step = tile_plan.steps[s];
    if (step.row + step.height > raster.height() || step.col + step.width > raster.width())
      throw UsageError("tiler: plan does not fit the raster");
    SampleRequest req;
    req.model = &model;
    req.image = current.crop(step.row, step.col, step.height, step.width);
    req.mask = step.sub_mask;
    req.temperature = options.temperature;
    req.seed = derive_seed(options.seed, s);
    req.count = 1;
    req.orientation = options.flips ? OrientationPolicy::RandomFlips : OrientationPolicy::Identity;
    req.workers = 1;
    const CategoricalRaster filled = sample(req).front();
    for (int y = 0; y < step.height; ++y)
      for (int x = 0; x < step.width; ++x)
        if (!step.sub_mask.observed(y, x)) current.set(step.row + y, step.col + x, filled.at(y, x));
  }
  return current;
}

std::vector<CategoricalRaster> run_many(const TilePlan& tile_plan, const PixelConstrainedCnn<float>& model,
                                        const CategoricalRaster& raster, const PixelMask& mask,
                                        const TileRunOptions& options, int count, int workers) {
  if (count < 1) throw UsageError("tiler: count must be at least 1");
  std::vector<CategoricalRaster> out(static_cast<std::size_t>(count));
  std::vector<std::string> errors(out.size());
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int i = 0; i < count; ++i) {
    try {
      TileRunOptions o = options;
      o.seed = options.seed + static_cast<std::uint64_t>(i);
      out[static_cast<std::size_t>(i)] = run(tile_plan, model, raster, mask, o);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw NumericalError("tiled completion " + std::to_string(i) + ": " + errors[i]);
  return out;
}

ProbabilityMap probability_map(std::span<const CategoricalRaster> completions, std::span<const int> classes) {
  if (completions.empty()) throw UsageError("probability_map: no completions");
  ProbabilityMap map;
  map.height = completions[0].height();
  map.width = completions[0].width();
  map.classes.assign(classes.begin(), classes.end());
  std::vector<bool> member(256, false);
  for (int k : classes) {
    if (k < 0 || k > 255) throw UsageError("probability_map: class out of range");
    member[static_cast<std::size_t>(k)] = true;
  }
  map.values.assign(completions[0].size(), 0.0);
  for (const auto& c : completions) {
    if (c.height() != map.height || c.width() != map.width)
      throw FormatError(FormatErrorKind::DimensionMismatch, "probability_map: completions differ in shape");
    for (std::size_t i = 0; i < c.size(); ++i)
      if (member[c[i]]) map.values[i] += 1.0;
  }
  for (double& v : map.values) v /= static_cast<double>(completions.size());
  return map;
}

}  // namespace lulc
