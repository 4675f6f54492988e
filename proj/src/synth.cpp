#include "lulc/synth.hpp"

#include <algorithm>
#include <cstdlib>
#include <vector>

#include "lulc/error.hpp"
#include "lulc/rng.hpp"

namespace lulc {

namespace {

using Field = std::vector<std::int64_t>;

// One separable box-blur pass with clamped borders; integer arithmetic only.
void box_blur(Field& f, int h, int w, int radius) {
  Field tmp(f.size());
  const std::int64_t span = 2 * radius + 1;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::int64_t s = 0;
      for (int d = -radius; d <= radius; ++d) s += f[static_cast<std::size_t>(r * w + std::clamp(c + d, 0, w - 1))];
      tmp[static_cast<std::size_t>(r * w + c)] = s / span;
    }
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::int64_t s = 0;
      for (int d = -radius; d <= radius; ++d) s += tmp[static_cast<std::size_t>(std::clamp(r + d, 0, h - 1) * w + c)];
      f[static_cast<std::size_t>(r * w + c)] = s / span;
    }
}

void stamp_line(std::vector<std::uint8_t>& data, int h, int w, int r0, int c0, int r1, int c1, std::uint8_t cls) {
  const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
  const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
  int err = dc - dr;
  int r = r0, c = c0;
  while (true) {
    if (r >= 0 && r < h && c >= 0 && c < w) data[static_cast<std::size_t>(r * w + c)] = cls;
    if (r == r1 && c == c1) break;
    const int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c += sc;
    }
    if (e2 < dc) {
      err += dc;
      r += sr;
    }
  }
}

}  // namespace

CategoricalRaster synth_landscape(int height, int width, int num_classes, std::uint64_t seed,
                                  const SynthParams& params) {
  if (num_classes < 2 || num_classes > 256) throw UsageError("synth_landscape needs K in [2, 256]");
  if (height < 1 || width < 1) throw UsageError("synth_landscape needs positive dimensions");
  if (params.smoothing_radius < 0 || params.smoothing_passes < 0) throw UsageError("smoothing must be >= 0");
  const int road_class = params.road_class < 0 ? num_classes - 1 : params.road_class;
  if (road_class >= num_classes || params.water_class < 0 || params.water_class >= num_classes)
    throw UsageError("road/water class outside [0, K)");

  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  std::vector<Field> fields(static_cast<std::size_t>(num_classes), Field(n));
  for (auto& f : fields) {
    for (auto& v : f) v = static_cast<std::int64_t>(rng() >> 48);
    for (int p = 0; p < params.smoothing_passes; ++p) box_blur(f, height, width, params.smoothing_radius);
  }

  std::vector<std::uint8_t> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < num_classes; ++k)
      if (fields[static_cast<std::size_t>(k)][i] > fields[static_cast<std::size_t>(best)][i]) best = k;
    data[i] = static_cast<std::uint8_t>(best);
  }

  if (rng.bernoulli(params.water_probability)) {
    const double cr = rng.uniform(0.0, height), cc = rng.uniform(0.0, width);
    const double ar = rng.uniform(0.1, 0.25) * height, ac = rng.uniform(0.1, 0.25) * width;
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        const double y = (r + 0.5 - cr) / ar, x = (c + 0.5 - cc) / ac;
        if (x * x + y * y <= 1.0) data[static_cast<std::size_t>(r * width + c)] = static_cast<std::uint8_t>(params.water_class);
      }
  }

  for (int a = 0; a < params.road_attempts; ++a) {
    if (!rng.bernoulli(params.road_probability)) continue;
    // Endpoints on opposite edges, chosen per orientation.
    int r0, c0, r1, c1;
    if (rng.bernoulli(0.5)) {
      r0 = 0;
      r1 = height - 1;
      c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
      c1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
    } else {
      c0 = 0;
      c1 = width - 1;
      r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height)));
      r1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height)));
    }
    stamp_line(data, height, width, r0, c0, r1, c1, static_cast<std::uint8_t>(road_class));
  }

  return {height, width, num_classes, std::move(data)};
}

}  // namespace lulc
