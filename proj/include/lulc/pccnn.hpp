#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lulc/raster_io.hpp"
#include "lulc/tape.hpp"

namespace lulc {

struct ModelConfig {
  int image_size = 16;
  int K = 5;
  int num_gated_blocks = 6;
  int filters = 32;  // width of the gated feature maps; stack convs emit 2x this
  int kernel_size = 3;
  int aux_residual_blocks = 4;
  int aux_filters = 32;
  int squeeze_excite_reduction = 8;

  void validate() const;

  static ModelConfig desk() { return {}; }
  static ModelConfig paper() { return {40, 20, 22, 96, 5, 12, 96, 16}; }

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ParamCounts {
  std::size_t gen = 0;
  std::size_t aux = 0;
  std::size_t total = 0;
};

// Trainable parameter counts from the layer plan alone.
ParamCounts count_params(const ModelConfig& config);

enum class MaskType { A, B };

// Vertical-stack mask for a [out, in, k, k] weight: rows above the center, plus
// the center row for type B. Horizontal-stack mask for [out, in, 1, k]:
// columns left of the center, plus the center for type B.
struct MaskPair {
  Tensor vertical;
  Tensor horizontal;
  MaskType type = MaskType::A;
};

MaskPair make_mask_pair(MaskType type, int out_channels, int in_channels, int kernel_size);

// One-hot image (K channels) followed by the observed-mask channel. The
// generative stack gets every pixel (causality is enforced by the masks);
// the conditioning encoding zeroes the one-hot block at missing pixels.
template <class T>
BasicTensor<T> encode_generative_input(std::span<const CategoricalRaster> images, std::span<const PixelMask> masks,
                                       int num_classes);
template <class T>
BasicTensor<T> encode_conditioning_input(std::span<const CategoricalRaster> images, std::span<const PixelMask> masks,
                                         int num_classes);

// Gated PixelCNN generative network plus residual squeeze-and-excite auxiliary
// network; the two are combined by adding logits.
template <class T>
class PixelConstrainedCnn {
 public:
  PixelConstrainedCnn(const ModelConfig& config, std::uint64_t seed);
  PixelConstrainedCnn(const ModelConfig& config, ParameterStore<T> params);

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& params() { return params_; }
  const ParameterStore<T>& params() const { return params_; }

  // [N,K,H,W] logits of the generative network from encode_generative_input.
  Var forward_gen(Tape<T>& tape, const BasicTensor<T>& gen_input, Mode mode);
  // [N,K,H,W] logits of the auxiliary network from encode_conditioning_input.
  Var forward_aux(Tape<T>& tape, const BasicTensor<T>& cond_input, Mode mode);

  struct Logits {
    BasicTensor<T> gen;
    BasicTensor<T> aux;
    BasicTensor<T> total;
  };
  // Gradient-free evaluation of both networks on a batch.
  Logits logits(std::span<const CategoricalRaster> images, std::span<const PixelMask> masks, Mode mode);

  template <class U>
  PixelConstrainedCnn<U> cast() const {
    return PixelConstrainedCnn<U>(config_, params_.template cast<U>());
  }

 private:
  struct ConvRef {
    int weight = -1;
    int bias = -1;
  };
  struct NormRef {
    int gamma = -1, beta = -1, mean = -1, var = -1;
  };
  struct GatedBlock {
    ConvRef vertical, horizontal, v_to_h, out;
    NormRef v_norm, h_norm;
    MaskType type;
  };
  struct ResidualBlock {
    ConvRef conv1, conv2, se_reduce, se_expand;
    NormRef norm1, norm2;
  };

  void build_plan(bool allocate, std::uint64_t seed);
  ConvRef conv_param(const std::string& name, int out, int in, int kh, int kw, bool allocate, std::uint64_t& stream);
  NormRef norm_param(const std::string& name, int channels, bool allocate);
  Var conv(Tape<T>& tape, Var x, const ConvRef& ref, const BasicTensor<T>* mask = nullptr);
  Var norm(Tape<T>& tape, Var x, const NormRef& ref, Mode mode);

  ModelConfig config_;
  ParameterStore<T> params_;
  std::uint64_t init_seed_ = 0;
  std::vector<GatedBlock> gated_;
  std::vector<BasicTensor<T>> vertical_masks_, horizontal_masks_;
  ConvRef gen_head_;
  ConvRef aux_stem_;
  NormRef aux_stem_norm_;
  std::vector<ResidualBlock> residual_;
  ConvRef aux_head_;
};

struct LossValue {
  double nats = 0.0;  // mean per pixel
  double bits_per_dim = 0.0;
};

// Mean per-pixel categorical cross-entropy over every pixel of the batch.
template <class T>
LossValue loss(PixelConstrainedCnn<T>& model, std::span<const CategoricalRaster> images,
               std::span<const PixelMask> masks, Mode mode);

// [K,H,W] logits for a single image and mask.
template <class T>
BasicTensor<T> forward_logits(PixelConstrainedCnn<T>& model, const CategoricalRaster& image, const PixelMask& mask,
                              Mode mode = Mode::Eval);

struct AdamState;

nlohmann::json model_config_json(const ModelConfig& config);
Bytes save_model(const PixelConstrainedCnn<float>& model, const AdamState* adam = nullptr);
PixelConstrainedCnn<float> load_model(std::span<const std::uint8_t> bytes);

}  // namespace lulc
