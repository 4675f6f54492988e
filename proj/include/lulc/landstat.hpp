#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lulc/raster.hpp"

namespace lulc {

// Shannon entropy (nats) of the class proportions.
double entropy(const CategoricalRaster& raster);
// Ordered 4-neighbour pairs with equal classes; each matching edge counts twice.
std::int64_t adjacency(const CategoricalRaster& raster);
// Maximal 4-connected single-class regions.
std::int64_t patch_count(const CategoricalRaster& raster);
double modal_proportion(const CategoricalRaster& raster);

enum class Statistic { Entropy, Adjacency, PatchCount, ModalProportion };
inline constexpr std::array<Statistic, 4> kAllStatistics = {Statistic::Entropy, Statistic::Adjacency,
                                                            Statistic::PatchCount, Statistic::ModalProportion};
const char* to_string(Statistic s);

struct StatisticVector {
  double entropy = 0.0;
  double adjacency = 0.0;
  double patch_count = 0.0;
  double modal_proportion = 0.0;

  double get(Statistic s) const;
};

StatisticVector statistics(const CategoricalRaster& raster);

// Linear-interpolated empirical percentile (position p/100 * (n-1) in the
// sorted sample).
double percentile(std::vector<double> values, double p);

struct CoverageTruth {
  CategoricalRaster image;
  PixelMask mask;
};

// Returns `count` completions of truth `index`; must be deterministic in its
// arguments for the report to be reproducible.
using CompletionSampler =
    std::function<std::vector<CategoricalRaster>(std::size_t index, const CoverageTruth& truth, int count, double temperature)>;

struct CoverageCell {
  Statistic statistic;
  double percentile;
  double temperature;
  double coverage;
};

struct CoverageReport {
  std::vector<CoverageCell> cells;
  std::size_t images = 0;
  int samples_per_image = 0;

  double at(Statistic s, double percentile, double temperature) const;
  std::string csv() const;
};

// For each truth and temperature, the q% band is the central empirical
// percentile interval of the sampled statistics; coverage is the fraction of
// truths whose true statistic falls inside it (endpoints inclusive).
CoverageReport coverage(std::span<const CoverageTruth> truths, const CompletionSampler& sampler, int samples_per_image,
                        std::span<const double> percentiles, std::span<const double> temperatures);

inline constexpr std::array<double, 3> kDefaultPercentiles = {50.0, 90.0, 95.0};
inline constexpr std::array<double, 6> kDefaultTemperatures = {0.25, 0.5, 1.0, 1.1, 1.25, 1.5};

struct RbfPoint {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

struct GridSpec {
  double x0 = 0.0, y0 = 0.0;  // center of cell (0, 0)
  double dx = 1.0, dy = 1.0;
  int columns = 1, rows = 1;
};

// Gaussian-kernel exact interpolation, weights from (Phi + 1e-8 I) w = v.
// Returns row-major rows x columns values.
std::vector<double> rbf_interpolate(std::span<const RbfPoint> points, const GridSpec& grid, double length_scale);
double rbf_evaluate(std::span<const RbfPoint> points, std::span<const double> weights, double x, double y,
                    double length_scale);
std::vector<double> rbf_weights(std::span<const RbfPoint> points, double length_scale);

}  // namespace lulc
