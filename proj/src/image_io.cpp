#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"
#include "retigraph/raster.hpp"

namespace retigraph {

namespace {

// --- PGM -------------------------------------------------------------------

struct PnmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  size_t data_offset = 0;
};

PnmHeader parse_pgm_header(const std::vector<uint8_t>& bytes, const std::string& path) {
  size_t pos = 2;
  auto skip_space = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw FormatError("malformed PGM header in " + path);
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  PnmHeader h;
  h.width = static_cast<int>(read_int());
  h.height = static_cast<int>(read_int());
  h.maxval = static_cast<int>(read_int());
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("malformed PGM header in " + path);
  h.data_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0) throw FormatError("bad PGM dimensions in " + path);
  if (h.maxval <= 0 || h.maxval > 65535) throw FormatError("bad PGM maxval in " + path);
  return h;
}

IntensityGrid load_pgm(const std::vector<uint8_t>& bytes, const std::string& path,
                       double pixel_size_mm) {
  const PnmHeader h = parse_pgm_header(bytes, path);
  IntensityGrid img;
  img.width = h.width;
  img.height = h.height;
  img.pixel_size_mm = pixel_size_mm;
  const size_t n = static_cast<size_t>(h.width) * h.height;
  img.values.resize(n);
  const double scale = 1.0 / h.maxval;
  if (h.maxval < 256) {
    if (bytes.size() - h.data_offset < n) throw FormatError("truncated PGM data in " + path);
    for (size_t i = 0; i < n; ++i) img.values[i] = bytes[h.data_offset + i] * scale;
  } else {
    if (bytes.size() - h.data_offset < 2 * n) throw FormatError("truncated PGM data in " + path);
    for (size_t i = 0; i < n; ++i) {
      const uint16_t v = static_cast<uint16_t>((bytes[h.data_offset + 2 * i] << 8) |
                                               bytes[h.data_offset + 2 * i + 1]);
      img.values[i] = v * scale;
    }
  }
  return img;
}

// --- PNG -------------------------------------------------------------------

constexpr uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

uint32_t read_be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf out_len = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &out_len, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK || out_len != expected) throw FormatError("PNG inflate failed");
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

IntensityGrid load_png(const std::vector<uint8_t>& bytes, const std::string& path,
                       double pixel_size_mm) {
  if (bytes.size() < 8 + 25 || std::memcmp(bytes.data(), kPngSignature, 8) != 0)
    throw FormatError("not a PNG file: " + path);
  size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = -1;
  std::vector<uint8_t> idat;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = read_be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw FormatError("truncated PNG chunk in " + path);
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw FormatError("bad IHDR in " + path);
      width = static_cast<int>(read_be32(data));
      height = static_cast<int>(read_be32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw FormatError("interlaced PNG unsupported: " + path);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0) throw FormatError("bad PNG dimensions in " + path);
  if (color_type != 0 || (bit_depth != 8 && bit_depth != 16))
    throw FormatError("only 8/16-bit grayscale PNG supported: " + path);

  const int bpp = bit_depth / 8;
  const size_t stride = static_cast<size_t>(width) * bpp;
  std::vector<uint8_t> raw = zlib_inflate(idat, (stride + 1) * height);

  // Undo per-scanline filters in place.
  std::vector<uint8_t> prev(stride, 0);
  IntensityGrid img;
  img.width = width;
  img.height = height;
  img.pixel_size_mm = pixel_size_mm;
  img.values.resize(static_cast<size_t>(width) * height);
  const double scale = bit_depth == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
  std::vector<uint8_t> cur(stride);
  for (int y = 0; y < height; ++y) {
    const uint8_t filter = raw[(stride + 1) * y];
    const uint8_t* src = &raw[(stride + 1) * y + 1];
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<size_t>(bpp) ? cur[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw FormatError("bad PNG filter in " + path);
      }
      cur[i] = static_cast<uint8_t>(v & 0xff);
    }
    for (int x = 0; x < width; ++x) {
      const double v = bit_depth == 8
                           ? cur[x]
                           : static_cast<double>((cur[2 * x] << 8) | cur[2 * x + 1]);
      img.values[static_cast<size_t>(y) * width + x] = v * scale;
    }
    std::swap(prev, cur);
  }
  return img;
}

void append_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
  append_be32(out, static_cast<uint32_t>(data.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t c = static_cast<uint32_t>(
      crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
  append_be32(out, c);
}

// Deflate "stored" blocks: byte-identical output independent of zlib version.
std::vector<uint8_t> deflate_stored(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> out;
  out.push_back(0x78);
  out.push_back(0x01);
  size_t pos = 0;
  do {
    const size_t n = std::min<size_t>(raw.size() - pos, 65535);
    const bool last = pos + n == raw.size();
    out.push_back(last ? 1 : 0);
    out.push_back(static_cast<uint8_t>(n & 0xff));
    out.push_back(static_cast<uint8_t>(n >> 8));
    out.push_back(static_cast<uint8_t>(~n & 0xff));
    out.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
    out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + n);
    pos += n;
  } while (pos < raw.size());
  const uint32_t adler = static_cast<uint32_t>(adler32(1, raw.data(), static_cast<uInt>(raw.size())));
  append_be32(out, adler);
  return out;
}

}  // namespace

IntensityGrid load_image(const std::string& path, double pixel_size_mm) {
  if (pixel_size_mm <= 0.0) throw ArgumentError("pixel_size_mm must be positive");
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5')
    return load_pgm(bytes, path, pixel_size_mm);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0)
    return load_png(bytes, path, pixel_size_mm);
  throw FormatError("unsupported image format (expected P5 PGM or grayscale PNG): " + path);
}

void save_pgm(const IntensityGrid& img, const std::string& path) {
  std::vector<uint8_t> out;
  char header[64];
  const int len = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", img.width, img.height);
  out.insert(out.end(), header, header + len);
  out.reserve(out.size() + img.values.size());
  for (double v : img.values) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<uint8_t>(std::lround(c * 255.0)));
  }
  write_file_atomic(path, out.data(), out.size());
}

void save_pgm(const BinaryGrid& mask, const std::string& path) {
  std::vector<uint8_t> out;
  char header[64];
  const int len = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", mask.width, mask.height);
  out.insert(out.end(), header, header + len);
  out.reserve(out.size() + mask.mask.size());
  for (uint8_t v : mask.mask) out.push_back(v ? 255 : 0);
  write_file_atomic(path, out.data(), out.size());
}

std::vector<uint8_t> encode_png(const RgbImage& img) {
  std::vector<uint8_t> out(kPngSignature, kPngSignature + 8);
  std::vector<uint8_t> ihdr;
  append_be32(ihdr, static_cast<uint32_t>(img.width));
  append_be32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);   // deflate
  ihdr.push_back(0);   // filter method
  ihdr.push_back(0);   // no interlace
  append_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  const size_t stride = static_cast<size_t>(img.width) * 3;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), img.data.begin() + y * stride, img.data.begin() + (y + 1) * stride);
  }
  append_chunk(out, "IDAT", deflate_stored(raw));
  append_chunk(out, "IEND", {});
  return out;
}

void save_png(const RgbImage& img, const std::string& path) {
  const std::vector<uint8_t> bytes = encode_png(img);
  write_file_atomic(path, bytes.data(), bytes.size());
}

}  // namespace retigraph
