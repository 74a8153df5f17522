#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "red/errors.hpp"
#include "red/tensor.hpp"

namespace red {

/// [0,1] → 0..255 with rounding; out-of-range values saturate.
inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

/// 8-bit grayscale PNG.
inline void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2) throw InvalidArgument("write_png: expected an H×W image");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IngestionError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IngestionError("libpng initialization failed");
  }
  const std::size_t h = image.dim(0), w = image.dim(1);
  std::vector<std::uint8_t> row(w);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IngestionError("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) row[c] = to_byte(image.at(r, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads a PNG as grayscale in [0,1] (255 → 1.0). Color images are reduced
/// with libpng's rgb-to-gray conversion; 16-bit samples are stripped to 8.
inline Tensor read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IngestionError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IngestionError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestionError("libpng initialization failed");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestionError("corrupt PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  pixels.resize(static_cast<std::size_t>(w) * h);
  rows.resize(h);
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = pixels.data() + static_cast<std::size_t>(r) * w;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  Tensor out({h, w});
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = pixels[i] / 255.0;
  return out;
}

/// Binary (P5) 8-bit PGM.
inline void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2) throw InvalidArgument("write_pgm: expected an H×W image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  std::vector<char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) bytes[i] = static_cast<char>(to_byte(image[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || !in || maxval == 0 || maxval > 255) {
    throw IngestionError(path.string() + " is not an 8-bit binary PGM");
  }
  in.get();
  std::vector<char> bytes(w * h);
  if (!in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw IngestionError("truncated PGM " + path.string());
  }
  Tensor out({h, w});
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / static_cast<double>(maxval);
  }
  return out;
}

/// Dispatches on extension: .png or .pgm.
inline Tensor read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IngestionError("missing image file " + path.string());
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  return read_png(path);
}

inline void write_image(const std::filesystem::path& path, const Tensor& image) {
  if (path.extension() == ".pgm") {
    write_pgm(path, image);
  } else {
    write_png(path, image);
  }
}

}  // namespace red
