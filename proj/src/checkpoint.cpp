#include "lulc/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "lulc/error.hpp"

namespace lulc {

namespace le {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(Bytes& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void Reader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n)
    throw FormatError(FormatErrorKind::TruncatedPayload,
                      "needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_));
}

void Reader::expect_magic(const char* magic) {
  if (bytes_.size() - pos_ < 4 || std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
    throw FormatError(FormatErrorKind::BadMagic, std::string("expected magic ") + magic);
  pos_ += 4;
}

std::uint8_t Reader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }
double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string Reader::string(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

}  // namespace le

namespace {

void put_json(Bytes& out, const nlohmann::json& j) {
  const std::string text = j.dump();
  le::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
}

nlohmann::json get_json(le::Reader& in) {
  const std::uint32_t n = in.u32();
  try {
    return nlohmann::json::parse(in.string(n));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Other, std::string("bad JSON header: ") + e.what());
  }
}

}  // namespace

Bytes encode_checkpoint(const nlohmann::json& config, const ParameterStore<float>& params, const AdamState* adam) {
  Bytes out{'C', 'K', 'P', 'T', kCheckpointVersion};
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params)
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"trainable", p.trainable}});
  put_json(out, {{"config", config}, {"tensors", tensors}});
  for (const auto& p : params)
    for (float v : p.value.values()) le::put_f32(out, v);
  if (adam) {
    out.insert(out.end(), {'A', 'D', 'A', 'M'});
    put_json(out, {{"lr", adam->config.lr},
                   {"beta1", adam->config.beta1},
                   {"beta2", adam->config.beta2},
                   {"eps", adam->config.eps},
                   {"t", adam->t}});
    for (const auto& m : adam->m)
      for (float v : m.values()) le::put_f32(out, v);
    for (const auto& v : adam->v)
      for (float x : v.values()) le::put_f32(out, x);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  le::Reader in(bytes);
  in.expect_magic("CKPT");
  const std::uint8_t version = in.u8();
  if (version != kCheckpointVersion)
    throw FormatError(FormatErrorKind::BadVersion, "unsupported checkpoint version " + std::to_string(version));
  const nlohmann::json header = get_json(in);
  Checkpoint ck;
  try {
    ck.config = header.at("config");
    for (const auto& t : header.at("tensors")) {
      Shape shape = t.at("shape").get<Shape>();
      Tensor value(shape);
      ck.params.add(t.at("name").get<std::string>(), std::move(value), t.at("trainable").get<bool>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::Other, std::string("bad checkpoint header: ") + e.what());
  }
  for (auto& p : ck.params)
    for (float& v : p.value.values()) v = in.f32();
  if (!in.at_end()) {
    in.expect_magic("ADAM");
    const nlohmann::json aj = get_json(in);
    AdamConfig cfg{aj.at("lr").get<double>(), aj.at("beta1").get<double>(), aj.at("beta2").get<double>(),
                   aj.at("eps").get<double>()};
    AdamState state = make_adam_state(ck.params, cfg);
    state.t = aj.at("t").get<std::int64_t>();
    for (auto& m : state.m)
      for (float& v : m.values()) v = in.f32();
    for (auto& v : state.v)
      for (float& x : v.values()) x = in.f32();
    if (!in.at_end()) throw FormatError(FormatErrorKind::Other, "trailing bytes after Adam state");
    ck.adam = std::move(state);
  }
  return ck;
}

}  // namespace lulc
