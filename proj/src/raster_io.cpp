#include "lulc/raster_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lulc/error.hpp"

namespace lulc {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

Bytes encode_grid(const char* magic, int h, int w, int k, std::span<const std::uint8_t> payload) {
  Bytes out;
  out.reserve(kCrasHeaderSize + payload.size());
  out.insert(out.end(), magic, magic + 4);
  out.push_back(kCrasVersion);
  out.push_back(0);  // flags
  put_u16(out, static_cast<std::uint16_t>(h));
  put_u16(out, static_cast<std::uint16_t>(w));
  out.push_back(static_cast<std::uint8_t>(k));
  out.push_back(0);  // reserved
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

struct GridHeader {
  int height;
  int width;
  int k;
};

GridHeader decode_header(const char* magic, std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0)
    throw FormatError(FormatErrorKind::BadMagic, std::string("expected magic ") + magic);
  if (bytes.size() < kCrasHeaderSize)
    throw FormatError(FormatErrorKind::TruncatedPayload, "header shorter than 12 bytes");
  if (bytes[4] != kCrasVersion)
    throw FormatError(FormatErrorKind::BadVersion, "unsupported version " + std::to_string(bytes[4]));
  GridHeader h{get_u16(bytes, 6), get_u16(bytes, 8), bytes[10]};
  const std::size_t n = static_cast<std::size_t>(h.height) * static_cast<std::size_t>(h.width);
  if (h.height == 0 || h.width == 0)
    throw FormatError(FormatErrorKind::DimensionMismatch, "zero-sized grid");
  if (bytes.size() < kCrasHeaderSize + n)
    throw FormatError(FormatErrorKind::TruncatedPayload,
                      "expected " + std::to_string(n) + " payload bytes, got " +
                          std::to_string(bytes.size() - kCrasHeaderSize));
  if (bytes.size() > kCrasHeaderSize + n)
    throw FormatError(FormatErrorKind::Other, "trailing bytes after payload");
  return h;
}

}  // namespace

Bytes encode_cras(const CategoricalRaster& raster) {
  if (raster.num_classes() > 255)
    throw FormatError(FormatErrorKind::ClassIndexOutOfRange, "CRAS stores K in one byte (K <= 255)");
  return encode_grid("CRAS", raster.height(), raster.width(), raster.num_classes(), raster.data());
}

CategoricalRaster decode_cras(std::span<const std::uint8_t> bytes) {
  const GridHeader h = decode_header("CRAS", bytes);
  if (h.k < 1) throw FormatError(FormatErrorKind::ClassIndexOutOfRange, "K must be positive");
  std::vector<std::uint8_t> data(bytes.begin() + kCrasHeaderSize, bytes.end());
  return {h.height, h.width, h.k, std::move(data)};
}

Bytes encode_cmsk(const PixelMask& mask) {
  return encode_grid("CMSK", mask.height(), mask.width(), 2, mask.data());
}

PixelMask decode_cmsk(std::span<const std::uint8_t> bytes) {
  const GridHeader h = decode_header("CMSK", bytes);
  std::vector<std::uint8_t> data(bytes.begin() + kCrasHeaderSize, bytes.end());
  return {h.height, h.width, std::move(data)};
}

Bytes export_ppm(const CategoricalRaster& raster, const ClassPalette& palette) {
  if (palette.num_classes() != raster.num_classes())
    throw UsageError("palette has " + std::to_string(palette.num_classes()) + " classes, raster K=" +
                     std::to_string(raster.num_classes()));
  const std::string header =
      "P6\n" + std::to_string(raster.width()) + " " + std::to_string(raster.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(header.size() + raster.size() * 3);
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const Rgb& c = palette.colors[raster[i]];
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

Bytes export_heat_ppm(std::span<const double> values, int height, int width, double lo, double hi) {
  if (values.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw FormatError(FormatErrorKind::DimensionMismatch, "heat map size does not match dimensions");
  const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  const double span = hi > lo ? hi - lo : 1.0;
  for (double v : values) {
    double t = std::isfinite(v) ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.0;
    // blue -> white -> red
    std::uint8_t r, g, b;
    if (t < 0.5) {
      const double s = t / 0.5;
      r = static_cast<std::uint8_t>(std::lround(59 + s * (255 - 59)));
      g = static_cast<std::uint8_t>(std::lround(76 + s * (255 - 76)));
      b = static_cast<std::uint8_t>(std::lround(192 + s * (255 - 192)));
    } else {
      const double s = (t - 0.5) / 0.5;
      r = static_cast<std::uint8_t>(std::lround(255 - s * (255 - 180)));
      g = static_cast<std::uint8_t>(std::lround(255 - s * (255 - 4)));
      b = static_cast<std::uint8_t>(std::lround(255 - s * (255 - 38)));
    }
    out.push_back(r);
    out.push_back(g);
    out.push_back(b);
  }
  return out;
}

PpmImage decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P6") throw FormatError(FormatErrorKind::BadMagic, "not a P6 image");
  PpmImage img;
  img.width = std::stoi(token());
  img.height = std::stoi(token());
  if (std::stoi(token()) != 255) throw FormatError(FormatErrorKind::Other, "maxval must be 255");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (bytes.size() < pos + 3 * n) throw FormatError(FormatErrorKind::TruncatedPayload, "PPM payload");
  for (std::size_t i = 0; i < n; ++i)
    img.pixels.push_back(Rgb{bytes[pos + 3 * i], bytes[pos + 3 * i + 1], bytes[pos + 3 * i + 2]});
  return img;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatErrorKind::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

CategoricalRaster load_raster(const std::filesystem::path& path) { return decode_cras(read_file(path)); }
PixelMask load_mask(const std::filesystem::path& path) { return decode_cmsk(read_file(path)); }
void save_raster(const std::filesystem::path& path, const CategoricalRaster& raster) {
  write_file_atomic(path, encode_cras(raster));
}
void save_mask(const std::filesystem::path& path, const PixelMask& mask) {
  write_file_atomic(path, encode_cmsk(mask));
}

}  // namespace lulc
