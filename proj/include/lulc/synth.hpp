#pragma once

#include <cstdint>

#include "lulc/raster.hpp"

namespace lulc {

struct SynthParams {
  int smoothing_radius = 4;
  int smoothing_passes = 3;
  double road_probability = 0.3;  // per road attempt
  int road_attempts = 2;
  int road_class = -1;  // -1: K - 1
  double water_probability = 0.15;
  int water_class = kOpenWaterClass;
};

// Cohesive multi-class landscape: K box-blurred integer noise fields, argmax
// per pixel, then optional 1-pixel roads and elliptical water bodies.
CategoricalRaster synth_landscape(int height, int width, int num_classes, std::uint64_t seed,
                                  const SynthParams& params = {});

}  // namespace lulc
