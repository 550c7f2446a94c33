#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "error.hpp"
#include "fsutil.hpp"
#include "render.hpp"

namespace dpf {

namespace {

void append_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>(v & 0xFF));
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
  append_be32(out, static_cast<std::uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
  append_be32(out, crc);
}

std::uint8_t to_byte(double v) {
  const double mapped = (std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * 255.0;
  return static_cast<std::uint8_t>(std::lround(mapped));
}

}  // namespace

void write_normal_image_png(const NormalImage& image, const std::string& path) {
  require(image.width > 0 && image.height > 0, ErrorCode::InvalidArgument, "empty image");

  // Raw scanlines: filter byte 0 followed by RGB triples.
  std::string raw;
  raw.reserve(image.height * (1 + 3 * image.width));
  for (std::size_t y = 0; y < image.height; ++y) {
    raw.push_back('\0');
    for (std::size_t x = 0; x < image.width; ++x) {
      const Vec3 v = image.pixel(x, y);
      raw.push_back(static_cast<char>(to_byte(v.x)));
      raw.push_back(static_cast<char>(to_byte(v.y)));
      raw.push_back(static_cast<char>(to_byte(v.z)));
    }
  }

  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string compressed(compressed_size, '\0');
  const int rc = compress2(reinterpret_cast<Bytef*>(compressed.data()), &compressed_size,
                           reinterpret_cast<const Bytef*>(raw.data()),
                           static_cast<uLong>(raw.size()), 6);
  require(rc == Z_OK, ErrorCode::Io, "zlib compression failed");
  compressed.resize(compressed_size);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  append_be32(ihdr, static_cast<std::uint32_t>(image.width));
  append_be32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  append_chunk(png, "IHDR", ihdr);
  append_chunk(png, "IDAT", compressed);
  append_chunk(png, "IEND", "");

  write_file_atomic(path, png);
}

}  // namespace dpf
