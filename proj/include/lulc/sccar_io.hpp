#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lulc/diagnostics.hpp"
#include "lulc/hmc.hpp"
#include "lulc/raster_io.hpp"
#include "lulc/sccar.hpp"

namespace lulc {

inline constexpr std::uint8_t kSccdVersion = 1;

// Posterior draws in constrained coordinates, one flattened row per draw
// (see parameter_names), chain-major.
struct SccarDraws {
  int height = 0;
  int width = 0;
  int K = 0;
  int chains = 0;
  int draws_per_chain = 0;
  std::vector<Eigen::VectorXd> rows;
  nlohmann::json info = nlohmann::json::object();

  int N() const { return height * width; }
  std::vector<SccarParams> params() const;
  ChainDraws column(int index) const;
};

// "SCCD", version u8, u32 LE header length, JSON header {height, width, K,
// chains, draws_per_chain, parameters: [{name, shape}], info}, then the rows
// as f64 LE.
Bytes encode_sccd(const SccarDraws& draws);
SccarDraws decode_sccd(std::span<const std::uint8_t> bytes);

// Per-parameter diagnostics over every free constrained scalar (the unit
// diagonal and mirrored upper triangle of A are skipped).
std::vector<ParameterSummary> sccar_diagnostics(const SccarDraws& draws);

struct SccarFit {
  SccarDraws draws;
  std::vector<ParameterSummary> diagnostics;
  std::vector<double> step_sizes;
  std::vector<double> accept_rates;
  int divergences = 0;
};

// HMC over the unconstrained SCCAR posterior of one partially observed image.
SccarFit hmc_fit(const CategoricalRaster& raster, const PixelMask& mask, int K, const HmcOptions& options);

}  // namespace lulc
