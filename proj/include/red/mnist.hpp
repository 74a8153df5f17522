#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "red/errors.hpp"
#include "red/tensor.hpp"

namespace red {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IngestionError("truncated IDX header in " + path.string());
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace detail

/// IDX3 unsigned-byte images, normalized to [0,1].
inline std::vector<Tensor> read_idx_images(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  const std::uint32_t magic = detail::read_be32(in, path);
  if (magic != kIdxImageMagic) {
    throw IngestionError(path.string() + ": bad IDX image magic");
  }
  const std::uint32_t count = detail::read_be32(in, path);
  const std::uint32_t rows = detail::read_be32(in, path);
  const std::uint32_t cols = detail::read_be32(in, path);
  std::vector<Tensor> images;
  images.reserve(count);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw IngestionError(path.string() + ": truncated at image " + std::to_string(i));
    }
    Tensor t({rows, cols});
    for (std::size_t j = 0; j < buf.size(); ++j) t[j] = buf[j] / 255.0;
    images.push_back(std::move(t));
  }
  return images;
}

inline std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  if (detail::read_be32(in, path) != kIdxLabelMagic) {
    throw IngestionError(path.string() + ": bad IDX label magic");
  }
  const std::uint32_t count = detail::read_be32(in, path);
  std::vector<unsigned char> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count))) {
    throw IngestionError(path.string() + ": truncated label data");
  }
  return {buf.begin(), buf.end()};
}

inline void write_idx_images(const std::filesystem::path& path, const std::vector<Tensor>& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
  const std::uint32_t rows = images.empty() ? 0 : static_cast<std::uint32_t>(images[0].dim(0));
  const std::uint32_t cols = images.empty() ? 0 : static_cast<std::uint32_t>(images[0].dim(1));
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(images.size()));
  detail::write_be32(out, rows);
  detail::write_be32(out, cols);
  for (const Tensor& t : images) {
    for (double v : t.values()) {
      out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
}

inline void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
  detail::write_be32(out, kIdxLabelMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.put(static_cast<char>(l));
}

}  // namespace red
