#include "lulc/landstat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lulc/error.hpp"

namespace lulc {

namespace {

std::vector<std::int64_t> histogram(const CategoricalRaster& raster) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(std::max(raster.num_classes(), 1)), 0);
  for (std::uint8_t v : raster.data()) ++counts[v];
  return counts;
}

int find(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    x = parent[static_cast<std::size_t>(x)];
  }
  return x;
}

}  // namespace

double entropy(const CategoricalRaster& raster) {
  const double n = static_cast<double>(raster.size());
  double h = 0.0;
  for (std::int64_t c : histogram(raster))
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
  return h;
}

std::int64_t adjacency(const CategoricalRaster& raster) {
  std::int64_t undirected = 0;
  for (int r = 0; r < raster.height(); ++r)
    for (int c = 0; c < raster.width(); ++c) {
      if (c + 1 < raster.width() && raster.at(r, c) == raster.at(r, c + 1)) ++undirected;
      if (r + 1 < raster.height() && raster.at(r, c) == raster.at(r + 1, c)) ++undirected;
    }
  return 2 * undirected;
}

std::int64_t patch_count(const CategoricalRaster& raster) {
  const int H = raster.height(), W = raster.width();
  std::vector<int> parent(raster.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::int64_t patches = static_cast<std::int64_t>(raster.size());
  auto unite = [&](std::size_t a, std::size_t b) {
    const int ra = find(parent, static_cast<int>(a)), rb = find(parent, static_cast<int>(b));
    if (ra != rb) {
      parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
      --patches;
    }
  };
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const std::size_t i = raster.index(r, c);
      if (c + 1 < W && raster[i] == raster[i + 1]) unite(i, i + 1);
      if (r + 1 < H && raster[i] == raster[i + static_cast<std::size_t>(W)]) unite(i, i + static_cast<std::size_t>(W));
    }
  return patches;
}

double modal_proportion(const CategoricalRaster& raster) {
  const auto counts = histogram(raster);
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(raster.size());
}

const char* to_string(Statistic s) {
  switch (s) {
    case Statistic::Entropy: return "entropy";
    case Statistic::Adjacency: return "adjacency";
    case Statistic::PatchCount: return "patch_count";
    case Statistic::ModalProportion: return "modal_proportion";
  }
  return "unknown";
}

double StatisticVector::get(Statistic s) const {
  switch (s) {
    case Statistic::Entropy: return entropy;
    case Statistic::Adjacency: return adjacency;
    case Statistic::PatchCount: return patch_count;
    case Statistic::ModalProportion: return modal_proportion;
  }
  return 0.0;
}

StatisticVector statistics(const CategoricalRaster& raster) {
  return {entropy(raster), static_cast<double>(adjacency(raster)), static_cast<double>(patch_count(raster)),
          modal_proportion(raster)};
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw UsageError("percentile of an empty sample");
  if (p < 0.0 || p > 100.0) throw UsageError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double CoverageReport::at(Statistic s, double p, double t) const {
  for (const auto& c : cells)
    if (c.statistic == s && c.percentile == p && c.temperature == t) return c.coverage;
  throw UsageError("coverage report has no such cell");
}

std::string CoverageReport::csv() const {
  std::ostringstream out;
  out << "statistic,percentile,temperature,coverage\n";
  for (const auto& c : cells)
    out << to_string(c.statistic) << ',' << c.percentile << ',' << c.temperature << ',' << c.coverage << '\n';
  return out.str();
}

CoverageReport coverage(std::span<const CoverageTruth> truths, const CompletionSampler& sampler, int samples_per_image,
                        std::span<const double> percentiles, std::span<const double> temperatures) {
  if (samples_per_image < 20) throw UsageError("coverage needs at least 20 samples per image");
  if (truths.empty()) throw UsageError("coverage needs at least one truth image");
  const std::size_t S = kAllStatistics.size(), P = percentiles.size(), T = temperatures.size();
  // hits[t][s][p]
  std::vector<std::size_t> hits(T * S * P, 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const StatisticVector truth = statistics(truths[i].image);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<CategoricalRaster> draws;
      try {
        draws = sampler(i, truths[i], samples_per_image, temperatures[t]);
      } catch (const FormatError& e) {
        throw FormatError(e.kind(), "coverage: sampler failed on image " + std::to_string(i) + ": " + e.what());
      } catch (const UsageError& e) {
        throw UsageError("coverage: sampler failed on image " + std::to_string(i) + ": " + e.what());
      } catch (const Error& e) {
        throw NumericalError("coverage: sampler failed on image " + std::to_string(i) + ": " + e.what());
      }
      if (draws.size() != static_cast<std::size_t>(samples_per_image))
        throw UsageError("coverage: sampler returned the wrong number of completions");
      std::vector<StatisticVector> stats;
      stats.reserve(draws.size());
      for (const auto& d : draws) stats.push_back(statistics(d));
      for (std::size_t s = 0; s < S; ++s) {
        std::vector<double> v;
        v.reserve(stats.size());
        for (const auto& sv : stats) v.push_back(sv.get(kAllStatistics[s]));
        const double x = truth.get(kAllStatistics[s]);
        for (std::size_t p = 0; p < P; ++p) {
          const double lo = percentile(v, (100.0 - percentiles[p]) / 2.0);
          const double hi = percentile(v, (100.0 + percentiles[p]) / 2.0);
          if (x >= lo && x <= hi) ++hits[(t * S + s) * P + p];
        }
      }
    }
  }
  CoverageReport report;
  report.images = truths.size();
  report.samples_per_image = samples_per_image;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t t = 0; t < T; ++t)
        report.cells.push_back({kAllStatistics[s], percentiles[p], temperatures[t],
                                static_cast<double>(hits[(t * S + s) * P + p]) / static_cast<double>(truths.size())});
  return report;
}

}  // namespace lulc
