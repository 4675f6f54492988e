#include "lulc/sccar_io.hpp"

#include "lulc/checkpoint.hpp"

namespace lulc {

std::vector<SccarParams> SccarDraws::params() const {
  std::vector<SccarParams> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(unflatten(r, N(), K));
  return out;
}

ChainDraws SccarDraws::column(int index) const {
  ChainDraws out(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c)
    for (int t = 0; t < draws_per_chain; ++t)
      out[static_cast<std::size_t>(c)].push_back(rows[static_cast<std::size_t>(c * draws_per_chain + t)](index));
  return out;
}

Bytes encode_sccd(const SccarDraws& d) {
  const int width = d.N() * d.K + d.K * d.K + 3 * d.K;
  if (d.rows.size() != static_cast<std::size_t>(d.chains) * static_cast<std::size_t>(d.draws_per_chain))
    throw UsageError("SCCD: row count does not match chains x draws");
  nlohmann::json header{{"height", d.height},
                        {"width", d.width},
                        {"K", d.K},
                        {"chains", d.chains},
                        {"draws_per_chain", d.draws_per_chain},
                        {"parameters",
                         {{{"name", "omega"}, {"shape", {d.N(), d.K}}},
                          {{"name", "A"}, {"shape", {d.K, d.K}}},
                          {{"name", "m"}, {"shape", {d.K}}},
                          {{"name", "tau"}, {"shape", {d.K}}},
                          {{"name", "rho"}, {"shape", {d.K}}}}},
                        {"info", d.info}};
  const std::string text = header.dump();
  Bytes out{'S', 'C', 'C', 'D', kSccdVersion};
  le::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& r : d.rows) {
    if (r.size() != width) throw UsageError("SCCD: row has the wrong width");
    for (Eigen::Index i = 0; i < r.size(); ++i) le::put_f64(out, r(i));
  }
  return out;
}

SccarDraws decode_sccd(std::span<const std::uint8_t> bytes) {
  le::Reader in(bytes);
  in.expect_magic("SCCD");
  const std::uint8_t version = in.u8();
  if (version != kSccdVersion)
    throw FormatError(FormatErrorKind::BadVersion, "SCCD version " + std::to_string(version));
  const std::uint32_t len = in.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.string(len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Other, std::string("SCCD header: ") + e.what());
  }
  SccarDraws d;
  try {
    d.height = header.at("height").get<int>();
    d.width = header.at("width").get<int>();
    d.K = header.at("K").get<int>();
    d.chains = header.at("chains").get<int>();
    d.draws_per_chain = header.at("draws_per_chain").get<int>();
    d.info = header.value("info", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Other, std::string("SCCD header: ") + e.what());
  }
  if (d.height < 1 || d.width < 1 || d.K < 2 || d.chains < 0 || d.draws_per_chain < 0)
    throw FormatError(FormatErrorKind::DimensionMismatch, "SCCD header has invalid dimensions");
  const std::size_t width = static_cast<std::size_t>(d.N() * d.K + d.K * d.K + 3 * d.K);
  const std::size_t rows = static_cast<std::size_t>(d.chains) * static_cast<std::size_t>(d.draws_per_chain);
  if (in.remaining() > rows * width * 8) throw FormatError(FormatErrorKind::Other, "trailing bytes after SCCD payload");
  if (in.remaining() < rows * width * 8)
    throw FormatError(FormatErrorKind::TruncatedPayload, "SCCD payload has " + std::to_string(in.remaining()) +
                                                             " bytes, expected " + std::to_string(rows * width * 8));
  d.rows.resize(rows);
  for (auto& r : d.rows) {
    r.resize(static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < width; ++i) r(static_cast<Eigen::Index>(i)) = in.f64();
  }
  return d;
}

std::vector<ParameterSummary> sccar_diagnostics(const SccarDraws& d) {
  const auto names = parameter_names(d.N(), d.K);
  std::vector<ParameterSummary> out;
  const int a_begin = d.N() * d.K;
  for (int i = 0; i < static_cast<int>(names.size()); ++i) {
    if (i >= a_begin && i < a_begin + d.K * d.K) {
      const int j = (i - a_begin) / d.K, k = (i - a_begin) % d.K;
      if (j <= k) continue;
    }
    out.push_back(summarize(names[static_cast<std::size_t>(i)], d.column(i)));
  }
  return out;
}

SccarFit hmc_fit(const CategoricalRaster& raster, const PixelMask& mask, int K, const HmcOptions& options) {
  require_same_shape(raster, mask);
  if (mask.count_missing() == mask.size()) throw UsageError("SCCAR fit needs at least one observed pixel");
  if (K < 2) throw UsageError("SCCAR fit needs K >= 2");
  const CarStructure s = CarStructure::grid(raster.height(), raster.width());
  const LogDensityFn f = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    return log_posterior(theta, raster, mask, s, grad);
  };
  const HmcResult res = hmc_sample(f, unconstrained_size(s.N, K), options);

  SccarFit fit;
  fit.draws.height = raster.height();
  fit.draws.width = raster.width();
  fit.draws.K = K;
  fit.draws.chains = options.chains;
  fit.draws.draws_per_chain = options.draws;
  for (const auto& chain : res.chains) {
    fit.step_sizes.push_back(chain.step_size);
    fit.accept_rates.push_back(chain.accept_rate);
    fit.divergences += chain.divergences;
    for (const auto& x : chain.draws) fit.draws.rows.push_back(flatten(constrain(x, s.N, K)));
  }
  fit.draws.info = {{"seed", options.seed},
                    {"tune", options.tune},
                    {"target_accept", options.target_accept},
                    {"leapfrog_steps", options.leapfrog_steps},
                    {"divergences", fit.divergences}};
  if (options.chains >= 2 && options.draws >= 4) fit.diagnostics = sccar_diagnostics(fit.draws);
  return fit;
}

}  // namespace lulc
