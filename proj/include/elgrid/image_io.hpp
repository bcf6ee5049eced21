#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "elgrid/error.hpp"
#include "elgrid/image.hpp"

namespace elgrid {

namespace detail {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline GrayImage from_samples(const std::vector<uint16_t>& samples, int width,
                              int height, int channels, double max_value) {
  if (width <= 0 || height <= 0)
    raise(ErrorCode::IoError, "zero-area image");
  GrayImage img(width, height);
  const uint16_t* p = samples.data();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v;
      if (channels == 1) {
        v = p[0];
      } else {
        v = kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2];
      }
      img.at(x, y) = v / max_value;
      p += channels;
    }
  }
  return img;
}

inline GrayImage load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) raise(ErrorCode::IoError, "cannot open " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<png_bytep> rows;
  std::vector<uint8_t> buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorCode::IoError, "corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const int u16 = 1;
  if (*reinterpret_cast<const char*>(&u16) == 1) png_set_swap(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if ((depth != 8 && depth != 16) || (channels != 1 && channels != 3)) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorCode::UnsupportedFormat,
          "PNG must be 8/16-bit gray or RGB: " + path);
  }

  const size_t row_bytes = png_get_rowbytes(png, info);
  buf.resize(row_bytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = buf.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<uint16_t> samples(static_cast<size_t>(width) * height * channels);
  if (depth == 8) {
    for (size_t i = 0; i < samples.size(); ++i) samples[i] = buf[i];
  } else {
    std::memcpy(samples.data(), buf.data(), samples.size() * 2);
  }
  return from_samples(samples, width, height, channels,
                      depth == 8 ? 255.0 : 65535.0);
}

// Baseline TIFF: first IFD, uncompressed, chunky, 8/16-bit gray or RGB.
class TiffParser {
public:
  TiffParser(std::vector<uint8_t> bytes, std::string path)
      : b_(std::move(bytes)), path_(std::move(path)) {
    if (b_.size() < 8) fail("truncated header");
    if (b_[0] == 'I' && b_[1] == 'I')
      little_ = true;
    else if (b_[0] == 'M' && b_[1] == 'M')
      little_ = false;
    else
      fail("bad byte-order mark");
    if (u16(2) != 42) fail("bad magic");
  }

  GrayImage parse() {
    const uint32_t ifd = u32(4);
    if (ifd + 2 > b_.size()) fail("bad IFD offset");
    const int count = u16(ifd);
    uint32_t width = 0, height = 0, bits = 8, compression = 1;
    uint32_t photometric = 1, spp = 1, rows_per_strip = 0xffffffff, planar = 1;
    uint32_t sample_format = 1;
    std::vector<uint32_t> strip_offsets, strip_counts;
    for (int i = 0; i < count; ++i) {
      const uint32_t e = ifd + 2 + 12 * i;
      if (e + 12 > b_.size()) fail("truncated IFD");
      const int tag = u16(e), type = u16(e + 2);
      const uint32_t n = u32(e + 4);
      switch (tag) {
        case 256: width = value(e, type); break;
        case 257: height = value(e, type); break;
        case 258: bits = value_array(e, type, n).front(); break;
        case 259: compression = value(e, type); break;
        case 262: photometric = value(e, type); break;
        case 273: strip_offsets = value_array(e, type, n); break;
        case 277: spp = value(e, type); break;
        case 278: rows_per_strip = value(e, type); break;
        case 279: strip_counts = value_array(e, type, n); break;
        case 284: planar = value(e, type); break;
        case 339: sample_format = value_array(e, type, n).front(); break;
        default: break;
      }
    }
    if (width == 0 || height == 0) fail("zero-area image");
    if (width > 65536 || height > 65536) fail("implausible dimensions");
    if (compression != 1) fail("compressed TIFF not supported");
    if (planar != 1) fail("planar TIFF not supported");
    if (sample_format != 1) fail("non-integer samples not supported");
    if (bits != 8 && bits != 16) fail("bits per sample must be 8 or 16");
    if (spp != 1 && spp != 3) fail("samples per pixel must be 1 or 3");
    if (photometric > 2) fail("unsupported photometric interpretation");
    if (strip_offsets.empty()) fail("missing strip offsets");
    if (strip_counts.size() != strip_offsets.size()) fail("bad strip counts");

    const size_t bytes_per_sample = bits / 8;
    const size_t row_bytes = static_cast<size_t>(width) * spp * bytes_per_sample;
    std::vector<uint8_t> raster;
    raster.reserve(row_bytes * height);
    for (size_t s = 0; s < strip_offsets.size(); ++s) {
      const uint32_t off = strip_offsets[s], len = strip_counts[s];
      if (static_cast<size_t>(off) + len > b_.size()) fail("strip out of range");
      raster.insert(raster.end(), b_.begin() + off, b_.begin() + off + len);
    }
    if (raster.size() < row_bytes * height) fail("pixel data truncated");
    (void)rows_per_strip;

    std::vector<uint16_t> samples(static_cast<size_t>(width) * height * spp);
    for (size_t i = 0; i < samples.size(); ++i) {
      if (bits == 8)
        samples[i] = raster[i];
      else
        samples[i] = little_ ? raster[2 * i] | raster[2 * i + 1] << 8
                             : raster[2 * i] << 8 | raster[2 * i + 1];
    }
    const double maxv = bits == 8 ? 255.0 : 65535.0;
    if (photometric == 0)  // WhiteIsZero
      for (auto& s : samples) s = static_cast<uint16_t>(maxv - s);
    return from_samples(samples, static_cast<int>(width),
                        static_cast<int>(height), static_cast<int>(spp), maxv);
  }

private:
  [[noreturn]] void fail(const std::string& why) const {
    raise(ErrorCode::UnsupportedFormat, "TIFF " + path_ + ": " + why);
  }
  uint16_t u16(size_t off) const {
    if (off + 2 > b_.size()) raise(ErrorCode::IoError, "TIFF read past end");
    return little_ ? b_[off] | b_[off + 1] << 8 : b_[off] << 8 | b_[off + 1];
  }
  uint32_t u32(size_t off) const {
    if (off + 4 > b_.size()) raise(ErrorCode::IoError, "TIFF read past end");
    return little_ ? u16(off) | static_cast<uint32_t>(u16(off + 2)) << 16
                   : static_cast<uint32_t>(u16(off)) << 16 | u16(off + 2);
  }
  static size_t type_size(int type) {
    switch (type) {
      case 1: case 2: return 1;  // BYTE, ASCII
      case 3: return 2;          // SHORT
      case 4: return 4;          // LONG
      default: return 0;
    }
  }
  uint32_t read_typed(size_t off, int type) const {
    switch (type) {
      case 1: return off < b_.size() ? b_[off] : 0;
      case 3: return u16(off);
      case 4: return u32(off);
      default: fail("unsupported field type " + std::to_string(type));
    }
  }
  uint32_t value(size_t entry, int type) const {
    return read_typed(entry + 8, type);
  }
  std::vector<uint32_t> value_array(size_t entry, int type, uint32_t n) const {
    const size_t sz = type_size(type);
    if (sz == 0) fail("unsupported field type");
    std::vector<uint32_t> out;
    const size_t base = sz * n <= 4 ? entry + 8 : u32(entry + 8);
    for (uint32_t i = 0; i < n; ++i) out.push_back(read_typed(base + sz * i, type));
    return out;
  }

  std::vector<uint8_t> b_;
  std::string path_;
  bool little_ = true;
};

}  // namespace detail

/// Loads an 8/16-bit PNG or TIFF, grayscale or RGB (converted by Rec.601
/// luma), rescaling intensities to [0,1] by the container's full range.
inline GrayImage load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  static const uint8_t png_sig[4] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), png_sig, 4) == 0)
    return detail::load_png(path);
  if (bytes.size() >= 4 && ((bytes[0] == 'I' && bytes[1] == 'I') ||
                            (bytes[0] == 'M' && bytes[1] == 'M')))
    return detail::TiffParser(std::move(bytes), path).parse();
  raise(ErrorCode::UnsupportedFormat, "not a PNG or TIFF file: " + path);
}

/// Writes a 16-bit grayscale PNG, clamping intensities to [0,1].
inline void save_png_gray16(const GrayImage& img, const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) raise(ErrorCode::IoError, "cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double v = std::clamp(img.at(x, y), 0.0, 1.0);
      const auto s = static_cast<uint16_t>(std::lround(v * 65535.0));
      row[2 * x] = static_cast<uint8_t>(s >> 8);
      row[2 * x + 1] = static_cast<uint8_t>(s & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Writes an 8-bit grayscale PNG, clamping intensities to [0,1].
inline void save_png_gray8(const GrayImage& img, const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) raise(ErrorCode::IoError, "cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "libpng init failed");
  }
  std::vector<uint8_t> row(img.width());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      row[x] = static_cast<uint8_t>(
          std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255.0));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Writes an 8-bit RGB PNG from interleaved rgb bytes (3 per pixel).
inline void save_png_rgb8(const std::vector<uint8_t>& rgb, int width,
                          int height, const std::string& path) {
  if (rgb.size() != static_cast<size_t>(width) * height * 3)
    raise(ErrorCode::InvalidArgument, "rgb buffer size mismatch");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) raise(ErrorCode::IoError, "cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<uint8_t*>(rgb.data()) +
                           static_cast<size_t>(y) * width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace elgrid
