#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lulc/pccnn.hpp"

namespace lulc {

enum class OrientationPolicy { Identity, RandomFlips };

// Row reversal (vertical flip) and/or column reversal (horizontal flip). Each
// is an involution, so a transform is its own inverse.
struct Orientation {
  bool flip_rows = false;
  bool flip_cols = false;

  Orientation inverse() const { return *this; }
  bool operator==(const Orientation&) const = default;
};

CategoricalRaster apply(const Orientation& o, const CategoricalRaster& raster);
PixelMask apply(const Orientation& o, const PixelMask& mask);

struct Oriented {
  CategoricalRaster image;
  PixelMask mask;
  Orientation transform;
};

Oriented orient(const CategoricalRaster& image, const PixelMask& mask, OrientationPolicy policy, std::uint64_t seed);

struct SampleRequest {
  const PixelConstrainedCnn<float>* model = nullptr;
  CategoricalRaster image;
  PixelMask mask;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int count = 1;
  OrientationPolicy orientation = OrientationPolicy::Identity;
  int workers = 0;  // 0 = OpenMP default
};

// softmax(logits / T), log-sum-exp stabilized. Tiny T approaches the one-hot
// argmax; exactly tied logits stay tied at any T.
std::vector<double> temperature_scale(std::span<const double> logits, double temperature);

// At or below this temperature sample() decodes greedily: argmax with ties to
// the lowest class index. Plain softmax sampling would split exact ties evenly.
inline constexpr double kGreedyTemperature = 1e-4;

// Raster-order ancestral sampling in eval mode. The auxiliary network runs
// once per completion; the generative network runs once per missing pixel.
// Completion c uses the substream seed + c.
std::vector<CategoricalRaster> sample(const SampleRequest& request);

struct ScoredImage {
  CategoricalRaster raster;
  double nats = 0.0;  // total log-probability
  double bits_per_dim = 0.0;
};

// Chain-rule log-probability: true predecessors to the generative network and
// a fully-missing mask to the auxiliary network, in one forward pass.
ScoredImage score(const PixelConstrainedCnn<float>& model, const CategoricalRaster& raster);

}  // namespace lulc
