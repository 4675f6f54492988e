#include "lulc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <omp.h>

#include "lulc/rng.hpp"

namespace lulc {

namespace {

template <class Grid, class Make>
Grid flip(const Grid& g, const Orientation& o, Make make) {
  std::vector<std::uint8_t> out(g.size());
  const int H = g.height(), W = g.width();
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const int sr = o.flip_rows ? H - 1 - r : r;
      const int sc = o.flip_cols ? W - 1 - c : c;
      out[g.index(r, c)] = g.data()[g.index(sr, sc)];
    }
  return make(std::move(out));
}

// Forward passes in eval mode without a recording tape only read the
// parameter store, so one model is shared by all workers.
PixelConstrainedCnn<float>& shared(const PixelConstrainedCnn<float>& model) {
  return const_cast<PixelConstrainedCnn<float>&>(model);
}

}  // namespace

CategoricalRaster apply(const Orientation& o, const CategoricalRaster& raster) {
  return flip(raster, o, [&](std::vector<std::uint8_t> d) {
    return CategoricalRaster(raster.height(), raster.width(), raster.num_classes(), std::move(d));
  });
}

PixelMask apply(const Orientation& o, const PixelMask& mask) {
  return flip(mask, o, [&](std::vector<std::uint8_t> d) { return PixelMask(mask.height(), mask.width(), std::move(d)); });
}

Oriented orient(const CategoricalRaster& image, const PixelMask& mask, OrientationPolicy policy, std::uint64_t seed) {
  require_same_shape(image, mask);
  Orientation o;
  if (policy == OrientationPolicy::RandomFlips) {
    Rng rng(derive_seed(seed, 0x666C6970ULL));
    o.flip_rows = rng.bernoulli(0.5);
    o.flip_cols = rng.bernoulli(0.5);
  }
  return {apply(o, image), apply(o, mask), o};
}

std::vector<double> temperature_scale(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw UsageError("temperature must be positive");
  if (logits.empty()) throw UsageError("temperature_scale: empty logits");
  double mx = -INFINITY;
  for (double l : logits) {
    if (!std::isfinite(l)) throw NumericalError("temperature_scale: non-finite logit");
    mx = std::max(mx, l);
  }
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp((logits[k] - mx) / temperature);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

namespace {

CategoricalRaster complete_one(PixelConstrainedCnn<float>& model, const CategoricalRaster& image,
                               const PixelMask& mask, double temperature, Rng& rng) {
  const ModelConfig& cfg = model.config();
  const int K = cfg.K, H = image.height(), W = image.width();
  const std::size_t plane = static_cast<std::size_t>(H) * static_cast<std::size_t>(W);

  Tensor aux;
  {
    Tape<float> tape(false);
    aux = tape.value(model.forward_aux(
        tape, encode_conditioning_input<float>(std::span(&image, 1), std::span(&mask, 1), K), Mode::Eval));
  }

  // The generative logit at row r depends on input rows r - reach .. r only,
  // so each pass runs on that band instead of the whole image.
  const int reach = cfg.num_gated_blocks * (cfg.kernel_size / 2);
  CategoricalRaster current = image;
  std::vector<double> logits(static_cast<std::size_t>(K));
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      if (mask.observed(r, c)) continue;
      const int top = std::max(0, r - reach);
      const int rows = r - top + 1;
      const CategoricalRaster band = current.crop(top, 0, rows, W);
      const PixelMask band_mask = mask.crop(top, 0, rows, W);
      Tape<float> tape(false);
      const Tensor& gen = tape.value(model.forward_gen(
          tape, encode_generative_input<float>(std::span(&band, 1), std::span(&band_mask, 1), K), Mode::Eval));
      const std::size_t band_plane = static_cast<std::size_t>(rows) * static_cast<std::size_t>(W);
      const std::size_t at = static_cast<std::size_t>(rows - 1) * static_cast<std::size_t>(W) + static_cast<std::size_t>(c);
      for (int k = 0; k < K; ++k)
        logits[static_cast<std::size_t>(k)] =
            static_cast<double>(gen[static_cast<std::size_t>(k) * band_plane + at]) +
            static_cast<double>(aux[static_cast<std::size_t>(k) * plane + current.index(r, c)]);
      if (temperature <= kGreedyTemperature) {
        current.set(r, c, static_cast<std::uint8_t>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
        continue;
      }
      const auto p = temperature_scale(logits, temperature);
      current.set(r, c, static_cast<std::uint8_t>(rng.categorical(std::span<const double>(p))));
    }
  return current;
}

}  // namespace

std::vector<CategoricalRaster> sample(const SampleRequest& request) {
  if (!request.model) throw UsageError("sample: no model");
  if (!(request.temperature > 0.0)) throw UsageError("temperature must be positive");
  if (request.count < 1) throw UsageError("sample: count must be at least 1");
  require_same_shape(request.image, request.mask);
  if (request.image.num_classes() != request.model->config().K)
    throw UsageError("sample: raster K does not match the model");

  PixelConstrainedCnn<float>& model = shared(*request.model);
  std::vector<CategoricalRaster> out(static_cast<std::size_t>(request.count));
  std::vector<std::string> errors(out.size());
  const int workers = request.workers > 0 ? request.workers : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int i = 0; i < request.count; ++i) {
    try {
      const std::uint64_t seed = request.seed + static_cast<std::uint64_t>(i);
      const Oriented o = orient(request.image, request.mask, request.orientation, seed);
      Rng rng(seed);
      const CategoricalRaster done = complete_one(model, o.image, o.mask, request.temperature, rng);
      out[static_cast<std::size_t>(i)] = apply(o.transform.inverse(), done);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw NumericalError("completion " + std::to_string(i) + ": " + errors[i]);
  return out;
}

ScoredImage score(const PixelConstrainedCnn<float>& model, const CategoricalRaster& raster) {
  PixelConstrainedCnn<float>& m = shared(model);
  const int K = m.config().K;
  if (raster.num_classes() != K) throw UsageError("score: raster K does not match the model");
  const PixelMask missing = PixelMask::all_missing(raster.height(), raster.width());
  Tape<float> tape(false);
  Var g = m.forward_gen(tape, encode_generative_input<float>(std::span(&raster, 1), std::span(&missing, 1), K),
                        Mode::Eval);
  Var a = m.forward_aux(tape, encode_conditioning_input<float>(std::span(&raster, 1), std::span(&missing, 1), K),
                        Mode::Eval);
  const Tensor& gv = tape.value(g);
  const Tensor& av = tape.value(a);
  const std::size_t plane = raster.size();
  double total = 0.0;
  std::vector<double> logits(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < plane; ++i) {
    double mx = -INFINITY;
    for (int k = 0; k < K; ++k) {
      const std::size_t at = static_cast<std::size_t>(k) * plane + i;
      logits[static_cast<std::size_t>(k)] = static_cast<double>(gv[at]) + static_cast<double>(av[at]);
      mx = std::max(mx, logits[static_cast<std::size_t>(k)]);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += logits[raster[i]] - mx - std::log(z);
  }
  if (!std::isfinite(total)) throw NumericalError("score is not finite");
  ScoredImage out;
  out.raster = raster;
  out.nats = total;
  out.bits_per_dim = -total / std::numbers::ln2 / static_cast<double>(plane);
  return out;
}

}  // namespace lulc
