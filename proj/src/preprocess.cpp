#include "lulc/preprocess.hpp"

#include <algorithm>

#include "lulc/error.hpp"
#include "lulc/rng.hpp"

namespace lulc {

CategoricalRaster coarsen_majority(const CategoricalRaster& raster, int factor) {
  if (factor < 1) throw UsageError("coarsening factor must be positive");
  if (raster.height() % factor != 0)
    throw FormatError(FormatErrorKind::NotDivisible,
                      "height " + std::to_string(raster.height()) + " not divisible by " + std::to_string(factor));
  if (raster.width() % factor != 0)
    throw FormatError(FormatErrorKind::NotDivisible,
                      "width " + std::to_string(raster.width()) + " not divisible by " + std::to_string(factor));
  const int oh = raster.height() / factor;
  const int ow = raster.width() / factor;
  const int k = raster.num_classes();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(oh) * static_cast<std::size_t>(ow));
  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int dr = 0; dr < factor; ++dr)
        for (int dc = 0; dc < factor; ++dc) ++counts[raster.at(r * factor + dr, c * factor + dc)];
      // max_element returns the first maximum: lowest index wins ties.
      const auto mode = std::max_element(counts.begin(), counts.end()) - counts.begin();
      out[static_cast<std::size_t>(r) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(mode);
    }
  }
  return {oh, ow, k, std::move(out)};
}

void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = nlohmann::json{{"source_id", e.source_id}, {"row_offset", e.row_offset}, {"column_offset", e.column_offset}};
}

void from_json(const nlohmann::json& j, ManifestEntry& e) {
  j.at("source_id").get_to(e.source_id);
  j.at("row_offset").get_to(e.row_offset);
  j.at("column_offset").get_to(e.column_offset);
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = nlohmann::json{{"window_size", m.window_size},
                     {"K", m.K},
                     {"entries", m.entries},
                     {"water_class", m.water_class},
                     {"water_fraction_limit", m.water_fraction_limit}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  j.at("window_size").get_to(m.window_size);
  j.at("K").get_to(m.K);
  j.at("entries").get_to(m.entries);
  j.at("water_class").get_to(m.water_class);
  j.at("water_fraction_limit").get_to(m.water_fraction_limit);
}

double class_fraction(const CategoricalRaster& raster, int cls) {
  const auto data = raster.data();
  const auto n = std::count(data.begin(), data.end(), static_cast<std::uint8_t>(cls));
  return static_cast<double>(n) / static_cast<double>(data.size());
}

WindowSet extract_windows(std::span<const CategoricalRaster> sources, const WindowSpec& spec) {
  if (sources.empty()) throw UsageError("no source rasters");
  if (spec.count < 1) throw UsageError("window count must be >= 1");
  if (spec.window < 1) throw UsageError("window size must be >= 1");
  if (spec.water_limit < 0.0 || spec.water_limit > 1.0) throw UsageError("water limit must be in [0, 1]");
  const int k = sources.front().num_classes();
  for (const auto& s : sources) {
    if (s.num_classes() != k) throw FormatError(FormatErrorKind::DimensionMismatch, "sources disagree on K");
    if (spec.window > std::min(s.height(), s.width()))
      throw FormatError(FormatErrorKind::DimensionMismatch, "window larger than a source raster");
  }

  WindowSet out;
  out.manifest.window_size = spec.window;
  out.manifest.K = k;
  out.manifest.water_class = spec.water_class;
  out.manifest.water_fraction_limit = spec.water_limit;

  Rng rng(spec.seed);
  int rejections = 0;
  while (static_cast<int>(out.windows.size()) < spec.count) {
    const auto src = static_cast<int>(rng.below(sources.size()));
    const CategoricalRaster& s = sources[static_cast<std::size_t>(src)];
    const auto row = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.height() - spec.window + 1)));
    const auto col = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.width() - spec.window + 1)));
    CategoricalRaster w = s.crop(row, col, spec.window, spec.window);
    if (class_fraction(w, spec.water_class) > spec.water_limit) {
      if (++rejections >= spec.max_consecutive_rejections)
        throw FormatError(FormatErrorKind::Infeasible,
                          std::to_string(rejections) + " consecutive windows exceeded the water fraction limit");
      continue;
    }
    rejections = 0;
    out.manifest.entries.push_back({src, row, col});
    out.windows.push_back(std::move(w));
  }
  return out;
}

WindowSet extract_windows(const CategoricalRaster& raster, const WindowSpec& spec) {
  return extract_windows(std::span<const CategoricalRaster>(&raster, 1), spec);
}

}  // namespace lulc
