#pragma once

#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "lulc/adam.hpp"
#include "lulc/raster_io.hpp"

namespace lulc {

// "CKPT", version u8, u32 LE header length, JSON header {config, tensors:
// [{name, shape, trainable}]}, then every tensor as f32 LE in registry order.
// Optionally followed by "ADAM", u32 LE length, JSON {lr, beta1, beta2, eps,
// t}, and the m then v accumulators of the trainable tensors.
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config;
  ParameterStore<float> params;
  std::optional<AdamState> adam;
};

Bytes encode_checkpoint(const nlohmann::json& config, const ParameterStore<float>& params,
                        const AdamState* adam = nullptr);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Little-endian primitives shared by the binary formats.
namespace le {
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_f32(Bytes& out, float v);
void put_f64(Bytes& out, double v);

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  void expect_magic(const char* magic);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string string(std::size_t n);
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};
}  // namespace le

}  // namespace lulc
