#include "lulc/pccnn.hpp"

#include <cmath>
#include <numbers>

#include "lulc/checkpoint.hpp"
#include "lulc/rng.hpp"

namespace lulc {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw UsageError(std::string("model config: ") + name + " must be positive");
  };
  positive(image_size, "image_size");
  positive(num_gated_blocks, "num_gated_blocks");
  positive(filters, "filters");
  positive(kernel_size, "kernel_size");
  positive(aux_residual_blocks, "aux_residual_blocks");
  positive(aux_filters, "aux_filters");
  positive(squeeze_excite_reduction, "squeeze_excite_reduction");
  if (K < 2 || K > 255) throw UsageError("model config: K must be in [2, 255]");
  if (kernel_size % 2 == 0) throw UsageError("model config: kernel_size must be odd");
  if (filters % 2 != 0) throw UsageError("model config: filters must be even");
  if (image_size < kernel_size) throw UsageError("model config: image_size must be at least kernel_size");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"image_size", c.image_size},
                     {"K", c.K},
                     {"num_gated_blocks", c.num_gated_blocks},
                     {"filters", c.filters},
                     {"kernel_size", c.kernel_size},
                     {"aux_residual_blocks", c.aux_residual_blocks},
                     {"aux_filters", c.aux_filters},
                     {"squeeze_excite_reduction", c.squeeze_excite_reduction}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.K = j.value("K", d.K);
  c.num_gated_blocks = j.value("num_gated_blocks", d.num_gated_blocks);
  c.filters = j.value("filters", d.filters);
  c.kernel_size = j.value("kernel_size", d.kernel_size);
  c.aux_residual_blocks = j.value("aux_residual_blocks", d.aux_residual_blocks);
  c.aux_filters = j.value("aux_filters", d.aux_filters);
  c.squeeze_excite_reduction = j.value("squeeze_excite_reduction", d.squeeze_excite_reduction);
}

nlohmann::json model_config_json(const ModelConfig& config) { return config; }

namespace {

std::size_t conv_count(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw) {
  return out * in * kh * kw + out;
}

int se_width(const ModelConfig& c) { return std::max(1, c.aux_filters / c.squeeze_excite_reduction); }

}  // namespace

ParamCounts count_params(const ModelConfig& c) {
  c.validate();
  const std::size_t F = static_cast<std::size_t>(c.filters), k = static_cast<std::size_t>(c.kernel_size);
  const std::size_t K = static_cast<std::size_t>(c.K);
  ParamCounts out;
  for (int b = 0; b < c.num_gated_blocks; ++b) {
    const std::size_t in = b == 0 ? K + 1 : F;
    out.gen += conv_count(2 * F, in, k, k) + conv_count(2 * F, in, 1, k) + conv_count(2 * F, 2 * F, 1, 1) +
               conv_count(F, F, 1, 1) + 2 * (2 * F) + 2 * (2 * F);
  }
  out.gen += conv_count(K, F, 1, 1);

  const std::size_t A = static_cast<std::size_t>(c.aux_filters), S = static_cast<std::size_t>(se_width(c));
  out.aux += conv_count(A, K + 1, k, k) + 2 * A;
  for (int b = 0; b < c.aux_residual_blocks; ++b)
    out.aux += 2 * conv_count(A, A, k, k) + 2 * (2 * A) + conv_count(S, A, 1, 1) + conv_count(A, S, 1, 1);
  out.aux += conv_count(K, A, 1, 1);
  out.total = out.gen + out.aux;
  return out;
}

MaskPair make_mask_pair(MaskType type, int out_channels, int in_channels, int kernel_size) {
  const int center = kernel_size / 2;
  MaskPair pair;
  pair.type = type;
  pair.vertical = Tensor({out_channels, in_channels, kernel_size, kernel_size});
  pair.horizontal = Tensor({out_channels, in_channels, 1, kernel_size});
  const bool include_center = type == MaskType::B;
  std::vector<float> vtap(static_cast<std::size_t>(kernel_size * kernel_size), 0.0f);
  for (int r = 0; r < kernel_size; ++r)
    for (int c = 0; c < kernel_size; ++c)
      if (r < center || (r == center && include_center)) vtap[static_cast<std::size_t>(r * kernel_size + c)] = 1.0f;
  std::vector<float> htap(static_cast<std::size_t>(kernel_size), 0.0f);
  for (int c = 0; c < kernel_size; ++c)
    if (c < center || (c == center && include_center)) htap[static_cast<std::size_t>(c)] = 1.0f;
  const std::size_t planes = static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels);
  for (std::size_t p = 0; p < planes; ++p) {
    std::copy(vtap.begin(), vtap.end(), pair.vertical.data() + p * vtap.size());
    std::copy(htap.begin(), htap.end(), pair.horizontal.data() + p * htap.size());
  }
  return pair;
}

namespace {

template <class T>
BasicTensor<T> encode(std::span<const CategoricalRaster> images, std::span<const PixelMask> masks, int K,
                      bool zero_missing) {
  if (images.empty()) throw UsageError("encode: empty batch");
  if (images.size() != masks.size()) throw UsageError("encode: image and mask counts differ");
  const int H = images[0].height(), W = images[0].width();
  const std::size_t plane = static_cast<std::size_t>(H) * static_cast<std::size_t>(W);
  BasicTensor<T> out({static_cast<int>(images.size()), K + 1, H, W});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    const auto& mask = masks[n];
    require_same_shape(img, mask);
    if (img.height() != H || img.width() != W) throw UsageError("encode: images in a batch must share a shape");
    if (img.num_classes() != K)
      throw UsageError("encode: raster has K=" + std::to_string(img.num_classes()) + ", model expects " +
                       std::to_string(K));
    T* base = out.data() + n * static_cast<std::size_t>(K + 1) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const bool obs = mask.observed(i);
      if (obs || !zero_missing) base[static_cast<std::size_t>(img[i]) * plane + i] = T(1);
      base[static_cast<std::size_t>(K) * plane + i] = obs ? T(1) : T(0);
    }
  }
  return out;
}

}  // namespace

template <class T>
BasicTensor<T> encode_generative_input(std::span<const CategoricalRaster> images, std::span<const PixelMask> masks,
                                       int num_classes) {
  return encode<T>(images, masks, num_classes, false);
}

template <class T>
BasicTensor<T> encode_conditioning_input(std::span<const CategoricalRaster> images, std::span<const PixelMask> masks,
                                         int num_classes) {
  return encode<T>(images, masks, num_classes, true);
}

template <class T>
PixelConstrainedCnn<T>::PixelConstrainedCnn(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  build_plan(true, seed);
}

template <class T>
PixelConstrainedCnn<T>::PixelConstrainedCnn(const ModelConfig& config, ParameterStore<T> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  build_plan(false, 0);
}

template <class T>
typename PixelConstrainedCnn<T>::ConvRef PixelConstrainedCnn<T>::conv_param(const std::string& name, int out, int in,
                                                                            int kh, int kw, bool allocate,
                                                                            std::uint64_t& stream) {
  ConvRef ref;
  const Shape wshape{out, in, kh, kw};
  if (allocate) {
    // Uniform in +-1/sqrt(fan_in); biases start at zero.
    Rng rng(derive_seed(init_seed_, stream++));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kh * kw));
    BasicTensor<T> w(wshape);
    for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    ref.weight = params_.add(name + ".weight", std::move(w));
    ref.bias = params_.add(name + ".bias", BasicTensor<T>({out}));
  } else {
    ref.weight = params_.index_of(name + ".weight");
    ref.bias = params_.index_of(name + ".bias");
    require_shape(params_.at(ref.weight).value, wshape, (name + ".weight").c_str());
    require_shape(params_.at(ref.bias).value, Shape{out}, (name + ".bias").c_str());
  }
  return ref;
}

template <class T>
typename PixelConstrainedCnn<T>::NormRef PixelConstrainedCnn<T>::norm_param(const std::string& name, int channels,
                                                                            bool allocate) {
  NormRef ref;
  const Shape s{channels};
  if (allocate) {
    ref.gamma = params_.add(name + ".gamma", BasicTensor<T>(s, T(1)));
    ref.beta = params_.add(name + ".beta", BasicTensor<T>(s, T(0)));
    ref.mean = params_.add(name + ".running_mean", BasicTensor<T>(s, T(0)), false);
    ref.var = params_.add(name + ".running_var", BasicTensor<T>(s, T(1)), false);
  } else {
    ref.gamma = params_.index_of(name + ".gamma");
    ref.beta = params_.index_of(name + ".beta");
    ref.mean = params_.index_of(name + ".running_mean");
    ref.var = params_.index_of(name + ".running_var");
    for (int i : {ref.gamma, ref.beta, ref.mean, ref.var}) require_shape(params_.at(i).value, s, name.c_str());
  }
  return ref;
}

template <class T>
void PixelConstrainedCnn<T>::build_plan(bool allocate, std::uint64_t seed) {
  init_seed_ = seed;
  std::uint64_t stream = 0;
  const int F = config_.filters, k = config_.kernel_size, K = config_.K;

  gated_.clear();
  vertical_masks_.clear();
  horizontal_masks_.clear();
  for (int b = 0; b < config_.num_gated_blocks; ++b) {
    const int in = b == 0 ? K + 1 : F;
    const std::string p = "gen.block" + std::to_string(b);
    GatedBlock g;
    g.type = b == 0 ? MaskType::A : MaskType::B;
    g.vertical = conv_param(p + ".vertical", 2 * F, in, k, k, allocate, stream);
    g.horizontal = conv_param(p + ".horizontal", 2 * F, in, 1, k, allocate, stream);
    g.v_to_h = conv_param(p + ".v_to_h", 2 * F, 2 * F, 1, 1, allocate, stream);
    g.out = conv_param(p + ".h_out", F, F, 1, 1, allocate, stream);
    g.v_norm = norm_param(p + ".v_norm", 2 * F, allocate);
    g.h_norm = norm_param(p + ".h_norm", 2 * F, allocate);
    gated_.push_back(g);
    auto masks = make_mask_pair(g.type, 2 * F, in, k);
    vertical_masks_.push_back(masks.vertical.template cast<T>());
    horizontal_masks_.push_back(masks.horizontal.template cast<T>());
  }
  gen_head_ = conv_param("gen.head", K, F, 1, 1, allocate, stream);

  const int A = config_.aux_filters, S = se_width(config_);
  aux_stem_ = conv_param("aux.stem", A, K + 1, k, k, allocate, stream);
  aux_stem_norm_ = norm_param("aux.stem_norm", A, allocate);
  residual_.clear();
  for (int b = 0; b < config_.aux_residual_blocks; ++b) {
    const std::string p = "aux.block" + std::to_string(b);
    ResidualBlock r;
    r.conv1 = conv_param(p + ".conv1", A, A, k, k, allocate, stream);
    r.norm1 = norm_param(p + ".norm1", A, allocate);
    r.conv2 = conv_param(p + ".conv2", A, A, k, k, allocate, stream);
    r.norm2 = norm_param(p + ".norm2", A, allocate);
    r.se_reduce = conv_param(p + ".se_reduce", S, A, 1, 1, allocate, stream);
    r.se_expand = conv_param(p + ".se_expand", A, S, 1, 1, allocate, stream);
    residual_.push_back(r);
  }
  aux_head_ = conv_param("aux.head", K, A, 1, 1, allocate, stream);

  const int planned = config_.num_gated_blocks * 16 + 2 + 6 + config_.aux_residual_blocks * 16 + 2;
  if (params_.size() != planned)
    throw UsageError("parameter store holds " + std::to_string(params_.size()) + " tensors, config plans " +
                     std::to_string(planned));
}

template <class T>
Var PixelConstrainedCnn<T>::conv(Tape<T>& tape, Var x, const ConvRef& ref, const BasicTensor<T>* mask) {
  return ops::conv2d(tape, x, tape.parameter(params_, ref.weight), tape.parameter(params_, ref.bias), mask);
}

template <class T>
Var PixelConstrainedCnn<T>::norm(Tape<T>& tape, Var x, const NormRef& ref, Mode mode) {
  BatchNormBuffers<T> buffers{&params_.at(ref.mean).value, &params_.at(ref.var).value};
  return ops::batchnorm(tape, x, tape.parameter(params_, ref.gamma), tape.parameter(params_, ref.beta), buffers,
                        mode);
}

template <class T>
Var PixelConstrainedCnn<T>::forward_gen(Tape<T>& tape, const BasicTensor<T>& gen_input, Mode mode) {
  const int F = config_.filters;
  if (gen_input.rank() != 4 || gen_input.dim(1) != config_.K + 1)
    throw UsageError("forward_gen: expected [N," + std::to_string(config_.K + 1) + ",H,W] input, got " +
                     shape_string(gen_input.shape()));
  Var x = tape.constant(gen_input);
  Var v = x, h = x;
  for (std::size_t b = 0; b < gated_.size(); ++b) {
    const auto& g = gated_[b];
    Var vc = norm(tape, conv(tape, v, g.vertical, &vertical_masks_[b]), g.v_norm, mode);
    Var hc = conv(tape, h, g.horizontal, &horizontal_masks_[b]);
    Var hp = norm(tape, ops::add(tape, hc, conv(tape, vc, g.v_to_h)), g.h_norm, mode);
    Var v_next =
        ops::gated(tape, ops::slice_channels(tape, vc, 0, F), ops::slice_channels(tape, vc, F, 2 * F));
    Var hg = ops::gated(tape, ops::slice_channels(tape, hp, 0, F), ops::slice_channels(tape, hp, F, 2 * F));
    Var h_next = conv(tape, hg, g.out);
    if (b > 0) h_next = ops::add(tape, h_next, h);
    v = v_next;
    h = h_next;
  }
  return conv(tape, ops::relu(tape, h), gen_head_);
}

template <class T>
Var PixelConstrainedCnn<T>::forward_aux(Tape<T>& tape, const BasicTensor<T>& cond_input, Mode mode) {
  if (cond_input.rank() != 4 || cond_input.dim(1) != config_.K + 1)
    throw UsageError("forward_aux: expected [N," + std::to_string(config_.K + 1) + ",H,W] input, got " +
                     shape_string(cond_input.shape()));
  Var a = ops::relu(tape, norm(tape, conv(tape, tape.constant(cond_input), aux_stem_), aux_stem_norm_, mode));
  for (const auto& r : residual_) {
    Var y = ops::relu(tape, norm(tape, conv(tape, a, r.conv1), r.norm1, mode));
    y = norm(tape, conv(tape, y, r.conv2), r.norm2, mode);
    Var s = ops::global_avg_pool(tape, y);
    s = ops::sigmoid(tape, conv(tape, ops::relu(tape, conv(tape, s, r.se_reduce)), r.se_expand));
    a = ops::relu(tape, ops::add(tape, ops::channel_scale(tape, y, s), a));
  }
  return conv(tape, a, aux_head_);
}

template <class T>
typename PixelConstrainedCnn<T>::Logits PixelConstrainedCnn<T>::logits(std::span<const CategoricalRaster> images,
                                                                       std::span<const PixelMask> masks, Mode mode) {
  Tape<T> tape(false);
  Var g = forward_gen(tape, encode_generative_input<T>(images, masks, config_.K), mode);
  Var a = forward_aux(tape, encode_conditioning_input<T>(images, masks, config_.K), mode);
  Var t = ops::add(tape, g, a);
  return {tape.value(g), tape.value(a), tape.value(t)};
}

template <class T>
LossValue loss(PixelConstrainedCnn<T>& model, std::span<const CategoricalRaster> images,
               std::span<const PixelMask> masks, Mode mode) {
  Tape<T> tape(false);
  const int K = model.config().K;
  Var g = model.forward_gen(tape, encode_generative_input<T>(images, masks, K), mode);
  Var a = model.forward_aux(tape, encode_conditioning_input<T>(images, masks, K), mode);
  std::vector<int> targets;
  for (const auto& img : images) targets.insert(targets.end(), img.data().begin(), img.data().end());
  Var l = ops::softmax_cross_entropy(tape, ops::add(tape, g, a), std::span<const int>(targets));
  LossValue out;
  out.nats = static_cast<double>(tape.value(l)[0]);
  out.bits_per_dim = out.nats / std::numbers::ln2;
  return out;
}

template <class T>
BasicTensor<T> forward_logits(PixelConstrainedCnn<T>& model, const CategoricalRaster& image, const PixelMask& mask,
                              Mode mode) {
  auto parts = model.logits(std::span<const CategoricalRaster>(&image, 1), std::span<const PixelMask>(&mask, 1), mode);
  Shape s = parts.total.shape();
  s.erase(s.begin());
  return BasicTensor<T>(s, std::move(parts.total.storage()));
}

Bytes save_model(const PixelConstrainedCnn<float>& model, const AdamState* adam) {
  return encode_checkpoint(model_config_json(model.config()), model.params(), adam);
}

PixelConstrainedCnn<float> load_model(std::span<const std::uint8_t> bytes) {
  Checkpoint ck = decode_checkpoint(bytes);
  ModelConfig config;
  try {
    config = ck.config.get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Other, std::string("checkpoint config: ") + e.what());
  }
  try {
    return PixelConstrainedCnn<float>(config, std::move(ck.params));
  } catch (const UsageError& e) {
    throw FormatError(FormatErrorKind::DimensionMismatch, std::string("checkpoint does not match its config: ") +
                                                              e.what());
  }
}

#define LULC_INSTANTIATE_PCCNN(T)                                                                            \
  template class PixelConstrainedCnn<T>;                                                                     \
  template BasicTensor<T> encode_generative_input<T>(std::span<const CategoricalRaster>,                     \
                                                     std::span<const PixelMask>, int);                       \
  template BasicTensor<T> encode_conditioning_input<T>(std::span<const CategoricalRaster>,                   \
                                                       std::span<const PixelMask>, int);                     \
  template LossValue loss<T>(PixelConstrainedCnn<T>&, std::span<const CategoricalRaster>,                    \
                             std::span<const PixelMask>, Mode);                                              \
  template BasicTensor<T> forward_logits<T>(PixelConstrainedCnn<T>&, const CategoricalRaster&, const PixelMask&, \
                                            Mode);

LULC_INSTANTIATE_PCCNN(float)
LULC_INSTANTIATE_PCCNN(double)

}  // namespace lulc
