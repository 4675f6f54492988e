#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lulc/adam.hpp"
#include "lulc/pccnn.hpp"

namespace lulc {

// The training curriculum: each family blanks a different region.
enum class MaskFamily { TopHalf, BottomHalf, CenterRect, FullyMissing };

PixelMask make_training_mask(MaskFamily family, int height, int width);

// One uniformly drawn mask family per image for the given epoch.
std::vector<PixelMask> training_masks(std::size_t count, int height, int width, std::uint64_t seed, int epoch);

struct EpochRecord {
  int epoch = 0;
  std::string split;  // "train" or "valid"
  double nll_nats = 0.0;
  double bits_per_dim = 0.0;
  double wall_seconds = 0.0;
};

struct TrainOptions {
  int epochs = 300;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  // Called after every epoch's rows are appended; returning true stops early.
  std::function<bool(const std::vector<EpochRecord>&)> stop_when;
  std::function<void(const EpochRecord&)> on_record;
  std::optional<AdamState> resume;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  AdamState adam;
};

// Epoch 0 rows are evaluations of the initial parameters (eval mode, epoch-0
// masks for train, fully-missing masks for valid). Epoch e >= 1 train rows are
// the mean minibatch loss in train mode; valid rows use fully-missing masks.
TrainResult train(PixelConstrainedCnn<float>& model, std::span<const CategoricalRaster> train_set,
                  std::span<const CategoricalRaster> valid_set, const TrainOptions& options);

// Mean per-pixel loss over a dataset evaluated in batches.
LossValue evaluate(PixelConstrainedCnn<float>& model, std::span<const CategoricalRaster> images,
                   std::span<const PixelMask> masks, Mode mode, int batch_size = 64);

// Entropy (bits) of the pooled class histogram: the per-pixel cost of a model
// that ignores all context.
double marginal_entropy_bits(std::span<const CategoricalRaster> images);

std::string training_log_csv(std::span<const EpochRecord> log);

}  // namespace lulc
