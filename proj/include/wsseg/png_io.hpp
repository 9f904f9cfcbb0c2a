#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

/// Decoded PNG samples, interleaved, widened to 16 bits.
struct PngPixels {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 (gray) or 3 (RGB)
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

namespace detail {

struct PngMessage {
  char text[256] = {0};
};

extern "C" inline void wsseg_png_error(png_structp png, png_const_charp msg) {
  auto* m = static_cast<PngMessage*>(png_get_error_ptr(png));
  if (m) std::snprintf(m->text, sizeof(m->text), "%s", msg);
  png_longjmp(png, 1);
}
extern "C" inline void wsseg_png_warning(png_structp, png_const_charp) {}

struct MemoryReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t offset;
};

extern "C" inline void wsseg_png_read(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (r->offset + n > r->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, r->data + r->offset, n);
  r->offset += n;
}

extern "C" inline void wsseg_png_write(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + n);
}
extern "C" inline void wsseg_png_flush(png_structp) {}

// The setjmp frames below only hold trivially destructible locals.
inline bool png_read_header(png_structp png, png_infop info, png_uint_32* w, png_uint_32* h,
                            int* depth, int* color) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  *w = png_get_image_width(png, info);
  *h = png_get_image_height(png, info);
  *depth = png_get_bit_depth(png, info);
  *color = png_get_color_type(png, info);
  if (*depth == 16) png_set_swap(png);  // native little-endian uint16 rows
  png_read_update_info(png, info);
  return true;
}

inline bool png_read_rows(png_structp png, png_infop info, png_bytep* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, info);
  return true;
}

inline bool png_write_all(png_structp png, png_infop info, png_uint_32 w, png_uint_32 h,
                          int depth, int color, png_bytep* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_IHDR(png, info, w, h, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace detail

/// Decodes 8- or 16-bit grayscale or RGB PNG data. Palette, alpha and
/// sub-byte depths are rejected with FormatError.
inline PngPixels decode_png(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw FormatError("not a PNG stream");
  detail::PngMessage msg;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &msg, detail::wsseg_png_error,
                                           detail::wsseg_png_warning);
  if (!png) throw FormatError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  detail::MemoryReader reader{bytes.data(), bytes.size(), 0};
  png_set_read_fn(png, &reader, detail::wsseg_png_read);

  png_uint_32 w = 0, h = 0;
  int depth = 0, color = 0;
  auto fail = [&](const std::string& what) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(what);
  };
  if (!detail::png_read_header(png, info, &w, &h, &depth, &color))
    fail(std::string("PNG decode failed: ") + msg.text);
  if (depth != 8 && depth != 16) fail("unsupported PNG bit depth " + std::to_string(depth));
  int channels = 0;
  if (color == PNG_COLOR_TYPE_GRAY) channels = 1;
  else if (color == PNG_COLOR_TYPE_RGB) channels = 3;
  else fail("unsupported PNG color type (need gray or RGB)");

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(row_bytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * row_bytes;
  if (!detail::png_read_rows(png, info, rows.data()))
    fail(std::string("PNG decode failed: ") + msg.text);
  png_destroy_read_struct(&png, &info, nullptr);

  PngPixels out;
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.channels = channels;
  out.bit_depth = depth;
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  out.samples.resize(n);
  if (depth == 8) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  } else {
    std::memcpy(out.samples.data(), buffer.data(), n * 2);
  }
  return out;
}

inline std::vector<unsigned char> encode_png(const PngPixels& px) {
  if (px.channels != 1 && px.channels != 3) throw FormatError("PNG encode needs 1 or 3 channels");
  if (px.bit_depth != 8 && px.bit_depth != 16) throw FormatError("PNG encode needs depth 8 or 16");
  detail::PngMessage msg;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &msg, detail::wsseg_png_error,
                                            detail::wsseg_png_warning);
  if (!png) throw FormatError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> out;
  png_set_write_fn(png, &out, detail::wsseg_png_write, detail::wsseg_png_flush);

  const std::size_t per_row = static_cast<std::size_t>(px.width) * px.channels;
  std::vector<unsigned char> buffer(per_row * px.height * (px.bit_depth / 8));
  if (px.bit_depth == 8) {
    for (std::size_t i = 0; i < px.samples.size(); ++i)
      buffer[i] = static_cast<unsigned char>(px.samples[i]);
  } else {
    std::memcpy(buffer.data(), px.samples.data(), px.samples.size() * 2);
  }
  std::vector<png_bytep> rows(px.height);
  const std::size_t row_bytes = per_row * (px.bit_depth / 8);
  for (int y = 0; y < px.height; ++y) rows[y] = buffer.data() + y * row_bytes;
  const int color = px.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  const bool ok = detail::png_write_all(png, info, px.width, px.height, px.bit_depth, color,
                                        rows.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) throw FormatError(std::string("PNG encode failed: ") + msg.text);
  return out;
}

// Dense masks: 8-bit single-channel, 0 -> background, 255 -> ship.

inline DenseMask decode_dense_mask_png(std::span<const unsigned char> bytes) {
  const PngPixels px = decode_png(bytes);
  if (px.bit_depth != 8 || px.channels != 1)
    throw FormatError("dense mask PNG must be 8-bit single-channel");
  DenseMask mask(px.height, px.width);
  auto& data = mask.classes.data();
  for (std::size_t i = 0; i < px.samples.size(); ++i) {
    const auto v = px.samples[i];
    if (v == 0) data[i] = kBackground;
    else if (v == 255) data[i] = kShip;
    else throw ValueError("dense mask pixel value " + std::to_string(v) + " not in {0,255}");
  }
  return mask;
}

inline DenseMask load_dense_mask_png(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return decode_dense_mask_png(bytes);
}

inline std::vector<unsigned char> encode_dense_mask_png(const DenseMask& mask) {
  validate(mask);
  PngPixels px{mask.width(), mask.height(), 1, 8, {}};
  px.samples.reserve(mask.classes.size());
  for (auto v : mask.classes.data()) px.samples.push_back(v == kShip ? 255 : 0);
  return encode_png(px);
}

inline void save_dense_mask_png(const DenseMask& mask, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_dense_mask_png(mask));
}

// Images: gray or RGB, values mapped linearly onto [0,1].

inline Raster<float> decode_image_png(std::span<const unsigned char> bytes) {
  const PngPixels px = decode_png(bytes);
  const float scale = px.bit_depth == 16 ? 65535.0f : 255.0f;
  Raster<float> r(px.height, px.width, px.channels);
  for (int y = 0; y < px.height; ++y)
    for (int x = 0; x < px.width; ++x)
      for (int c = 0; c < px.channels; ++c)
        r(y, x, c) = px.samples[(static_cast<std::size_t>(y) * px.width + x) * px.channels + c] /
                     scale;
  return r;
}

inline Raster<float> load_image_png(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return decode_image_png(bytes);
}

inline std::vector<unsigned char> encode_image_png(const Raster<float>& r, int bit_depth = 16) {
  PngPixels px{r.width(), r.height(), r.channels(), bit_depth, {}};
  const float scale = bit_depth == 16 ? 65535.0f : 255.0f;
  px.samples.resize(r.size());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x)
      for (int c = 0; c < r.channels(); ++c) {
        const float v = std::clamp(r(y, x, c), 0.0f, 1.0f);
        px.samples[(static_cast<std::size_t>(y) * r.width() + x) * r.channels() + c] =
            static_cast<std::uint16_t>(std::lround(v * scale));
      }
  return encode_png(px);
}

inline void save_image_png(const Raster<float>& r, const std::filesystem::path& path,
                           int bit_depth = 16) {
  detail::write_file_bytes(path, encode_image_png(r, bit_depth));
}

}  // namespace wsseg
