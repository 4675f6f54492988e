#include "lulc/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lulc/rng.hpp"

namespace lulc {

PixelMask make_training_mask(MaskFamily family, int height, int width) {
  switch (family) {
    case MaskFamily::TopHalf:
      return PixelMask::with_hole(height, width, 0, 0, height / 2, width);
    case MaskFamily::BottomHalf:
      return PixelMask::with_hole(height, width, height / 2, 0, height - height / 2, width);
    case MaskFamily::CenterRect: {
      const int h = std::max(1, height / 2), w = std::max(1, width / 2);
      return PixelMask::with_hole(height, width, (height - h) / 2, (width - w) / 2, h, w);
    }
    case MaskFamily::FullyMissing:
      return PixelMask::all_missing(height, width);
  }
  throw UsageError("unknown mask family");
}

std::vector<PixelMask> training_masks(std::size_t count, int height, int width, std::uint64_t seed, int epoch) {
  Rng rng(derive_seed(seed ^ 0x6D61736BULL, static_cast<std::uint64_t>(epoch)));
  std::vector<PixelMask> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(make_training_mask(static_cast<MaskFamily>(rng.below(4)), height, width));
  return out;
}

LossValue evaluate(PixelConstrainedCnn<float>& model, std::span<const CategoricalRaster> images,
                   std::span<const PixelMask> masks, Mode mode, int batch_size) {
  if (images.empty()) throw UsageError("evaluate: empty dataset");
  if (images.size() != masks.size()) throw UsageError("evaluate: image and mask counts differ");
  double weighted = 0.0;
  for (std::size_t b = 0; b < images.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(images.size() - b, static_cast<std::size_t>(batch_size));
    weighted += loss(model, images.subspan(b, n), masks.subspan(b, n), mode).nats * static_cast<double>(n);
  }
  LossValue out;
  out.nats = weighted / static_cast<double>(images.size());
  out.bits_per_dim = out.nats / std::numbers::ln2;
  return out;
}

double marginal_entropy_bits(std::span<const CategoricalRaster> images) {
  if (images.empty()) throw UsageError("marginal entropy of an empty dataset");
  std::vector<double> counts(static_cast<std::size_t>(images[0].num_classes()), 0.0);
  double total = 0.0;
  for (const auto& img : images)
    for (std::uint8_t v : img.data()) {
      counts[v] += 1.0;
      total += 1.0;
    }
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / total) * std::log2(c / total);
  return h;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TrainResult train(PixelConstrainedCnn<float>& model, std::span<const CategoricalRaster> train_set,
                  std::span<const CategoricalRaster> valid_set, const TrainOptions& options) {
  if (train_set.empty()) throw UsageError("train: empty dataset");
  if (options.batch_size < 1) throw UsageError("train: batch_size must be positive");
  const int K = model.config().K;
  const int H = train_set[0].height(), W = train_set[0].width();
  for (const auto& img : train_set)
    if (img.height() != H || img.width() != W || img.num_classes() != K)
      throw FormatError(FormatErrorKind::DimensionMismatch, "train: windows do not match the model config");

  TrainResult result;
  result.adam = options.resume ? *options.resume : make_adam_state(model.params(), options.adam);
  const auto start = std::chrono::steady_clock::now();
  auto emit = [&](EpochRecord r) {
    r.wall_seconds = seconds_since(start);
    result.log.push_back(r);
    if (options.on_record) options.on_record(r);
  };

  std::vector<PixelMask> valid_masks;
  for (std::size_t i = 0; i < valid_set.size(); ++i) valid_masks.push_back(PixelMask::all_missing(H, W));
  auto emit_valid = [&](int epoch) {
    if (valid_set.empty()) return;
    const LossValue v = evaluate(model, valid_set, valid_masks, Mode::Eval, options.batch_size);
    emit({epoch, "valid", v.nats, v.bits_per_dim, 0.0});
  };

  {
    const auto masks = training_masks(train_set.size(), H, W, options.seed, 0);
    const LossValue l = evaluate(model, train_set, masks, Mode::Eval, options.batch_size);
    emit({0, "train", l.nats, l.bits_per_dim, 0.0});
    emit_valid(0);
  }
  if (options.stop_when && options.stop_when(result.log)) return result;

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(options.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    const auto masks = training_masks(train_set.size(), H, W, options.seed, epoch);

    double weighted = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t n = std::min(order.size() - b, static_cast<std::size_t>(options.batch_size));
      std::vector<CategoricalRaster> images;
      std::vector<PixelMask> batch_masks;
      std::vector<int> targets;
      for (std::size_t j = b; j < b + n; ++j) {
        images.push_back(train_set[order[j]]);
        batch_masks.push_back(masks[order[j]]);
        targets.insert(targets.end(), images.back().data().begin(), images.back().data().end());
      }
      model.params().zero_grad();
      Tape<float> tape(true);
      Var g = model.forward_gen(tape, encode_generative_input<float>(images, batch_masks, K), Mode::Train);
      Var a = model.forward_aux(tape, encode_conditioning_input<float>(images, batch_masks, K), Mode::Train);
      Var l = ops::softmax_cross_entropy(tape, ops::add(tape, g, a), std::span<const int>(targets));
      const double value = static_cast<double>(tape.value(l)[0]);
      if (!std::isfinite(value)) throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch));
      tape.backward(l);
      adam_step(model.params(), result.adam);
      weighted += value * static_cast<double>(n);
    }
    const double nats = weighted / static_cast<double>(order.size());
    emit({epoch, "train", nats, nats / std::numbers::ln2, 0.0});
    emit_valid(epoch);
    if (options.stop_when && options.stop_when(result.log)) break;
  }
  return result;
}

std::string training_log_csv(std::span<const EpochRecord> log) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,split,nll_nats,bits_per_dim,wall_seconds\n";
  for (const auto& r : log)
    out << r.epoch << ',' << r.split << ',' << r.nll_nats << ',' << r.bits_per_dim << ',' << r.wall_seconds << '\n';
  return out.str();
}

}  // namespace lulc
