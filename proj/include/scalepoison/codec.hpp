#pragma once

// Lossless raster I/O: PNG (8-bit gray/RGB) through libpng and binary PGM/PPM.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scalepoison/error.hpp"
#include "scalepoison/imaging.hpp"

namespace scalepoison {

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::unreadable_file, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::unreadable_file, path.string());
  return bytes;
}

inline bool has_png_signature(const std::vector<std::uint8_t>& b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() >= 8 && std::equal(sig, sig + 8, b.begin());
}

inline bool has_pnm_signature(const std::vector<std::uint8_t>& b) {
  return b.size() >= 2 && b[0] == 'P' && (b[1] == '5' || b[1] == '6');
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(Errc::corrupt_stream, name + ": " + png.message);
  }
  if (png.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&png);
    throw Error(Errc::unsupported_format, name + ": alpha channels are not supported");
  }
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw Error(Errc::unsupported_format, name + ": only 8-bit depth is supported");
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img(static_cast<int>(png.height), static_cast<int>(png.width), color ? 3 : 1);
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw Error(Errc::corrupt_stream, name + ": " + msg);
  }
  return img;
}

inline Image decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw Error(Errc::corrupt_stream, name + ": malformed PNM header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1L << 24)) throw Error(Errc::corrupt_stream, name + ": PNM header value too large");
      ++pos;
    }
    return v;
  };
  const int channels = bytes[1] == '6' ? 3 : 1;
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (maxval != 255) throw Error(Errc::unsupported_format, name + ": only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(Errc::corrupt_stream, name + ": missing separator after PNM header");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - pos < need) throw Error(Errc::corrupt_stream, name + ": truncated PNM data");
  Image img(static_cast<int>(h), static_cast<int>(w), channels);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), need, img.data.begin());
  return img;
}

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace detail

/// Decodes PNG, PGM (P5) or PPM (P6). Lossy formats are rejected.
inline Image load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (detail::has_png_signature(bytes)) return detail::decode_png(bytes, path.string());
  if (detail::has_pnm_signature(bytes)) return detail::decode_pnm(bytes, path.string());
  throw Error(Errc::unsupported_format, path.string());
}

/// Encodes by extension: .png, .pgm/.ppm/.pnm (P5 for 1 channel, P6 for 3).
inline void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.height <= 0 || img.width <= 0) throw Error(Errc::invalid_argument, "cannot save an empty image");
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, img.data.data(), 0, nullptr)) {
      throw Error(Errc::io_failure, path.string() + ": " + png.message);
    }
    return;
  }
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_failure, path.string());
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!out) throw Error(Errc::io_failure, path.string());
    return;
  }
  throw Error(Errc::unsupported_format, path.string() + ": unknown extension");
}

}  // namespace scalepoison
