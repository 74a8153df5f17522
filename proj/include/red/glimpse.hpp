#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "red/errors.hpp"
#include "red/tape.hpp"
#include "red/tensor.hpp"

namespace red {

/// Retina layout: channel i covers an n_i×n_i square around the fixation and
/// is average-pooled down to n_1×n_1.
struct GlimpseConfig {
  std::vector<int> sizes{18, 36, 54};

  std::size_t channels() const { return sizes.size(); }
  int base() const { return sizes.front(); }

  /// Pooling factor of channel i: n_i rounded up to a multiple of n_1.
  int pool_factor(std::size_t i) const { return (sizes[i] + base() - 1) / base(); }
  /// Side of the square actually read for channel i.
  int read_size(std::size_t i) const { return pool_factor(i) * base(); }

  std::uint64_t reads_per_glimpse() const {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < channels(); ++i) {
      total += static_cast<std::uint64_t>(read_size(i)) * static_cast<std::uint64_t>(read_size(i));
    }
    return total;
  }

  void validate() const {
    if (sizes.empty()) throw ConfigError("glimpse: at least one channel is required");
    if (sizes.front() < 1) throw ConfigError("glimpse: n_1 must be at least 1");
    for (std::size_t i = 1; i < sizes.size(); ++i) {
      if (sizes[i] <= sizes[i - 1]) {
        throw ConfigError("glimpse: patch sizes must be strictly increasing");
      }
    }
  }

  /// One message per channel whose size is not a multiple of n_1.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < channels(); ++i) {
      if (sizes[i] % base() != 0) {
        out.push_back("glimpse channel " + std::to_string(i + 1) + ": size " +
                      std::to_string(sizes[i]) + " is not a multiple of " +
                      std::to_string(base()) + "; reading " + std::to_string(read_size(i)) +
                      " pixels instead");
      }
    }
    return out;
  }
};

/// Fixation in normalized image coordinates: (-1,-1) is the bottom-left
/// corner, (1,1) the top-right. x is horizontal, y vertical.
struct Action {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Action&, const Action&) = default;
};

/// Continuous raster position, origin at the top-left pixel center.
struct PixelPos {
  double row = 0.0;
  double col = 0.0;
};

/// Integer raster position a glimpse is centered on.
struct PixelIndex {
  long row = 0;
  long col = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Counts pixel reads made by the sensor.
struct PixelCounter {
  std::uint64_t reads = 0;
};

inline PixelPos to_pixel(Action a, std::size_t height, std::size_t width) {
  const double x = std::clamp(a.x, -1.0, 1.0);
  const double y = std::clamp(a.y, -1.0, 1.0);
  return {(1.0 - y) * 0.5 * static_cast<double>(height - 1),
          (x + 1.0) * 0.5 * static_cast<double>(width - 1)};
}

/// Nearest-integer snap of a continuous position.
inline PixelIndex snap(PixelPos p) { return {std::lround(p.row), std::lround(p.col)}; }

/// Raw retina channels (n1×n1×c) centered on a fixed pixel. Pixels outside the
/// image read as zero; every read, in or out of bounds, is counted.
inline Tensor extract_glimpse_at(const Tensor& image, PixelIndex center, const GlimpseConfig& cfg,
                                 PixelCounter* counter = nullptr) {
  if (image.rank() != 2) {
    throw InvalidArgument("extract_glimpse: expected an H×W image, got " + to_string(image.shape()));
  }
  const auto n1 = static_cast<std::size_t>(cfg.base());
  const std::size_t c = cfg.channels();
  const auto h = static_cast<long>(image.dim(0));
  const auto w = static_cast<long>(image.dim(1));
  Tensor out({n1, n1, c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const long pool = cfg.pool_factor(ch);
    const long side = cfg.read_size(ch);
    const long r0 = center.row - side / 2;
    const long c0 = center.col - side / 2;
    const double inv = 1.0 / static_cast<double>(pool * pool);
    for (std::size_t u = 0; u < n1; ++u) {
      for (std::size_t v = 0; v < n1; ++v) {
        double acc = 0.0;
        const long br = r0 + static_cast<long>(u) * pool;
        const long bc = c0 + static_cast<long>(v) * pool;
        for (long i = 0; i < pool; ++i) {
          const long r = br + i;
          if (r < 0 || r >= h) continue;
          for (long j = 0; j < pool; ++j) {
            const long col = bc + j;
            if (col < 0 || col >= w) continue;
            acc += image[static_cast<std::size_t>(r * w + col)];
          }
        }
        out.at(u, v, ch) = acc * inv;
      }
    }
    if (counter) counter->reads += static_cast<std::uint64_t>(side * side);
  }
  return out;
}

inline Tensor extract_glimpse(const Tensor& image, Action a, const GlimpseConfig& cfg,
                              PixelCounter* counter = nullptr) {
  if (image.rank() != 2) {
    throw InvalidArgument("extract_glimpse: expected an H×W image, got " + to_string(image.shape()));
  }
  return extract_glimpse_at(image, snap(to_pixel(a, image.dim(0), image.dim(1))), cfg, counter);
}

/// What/where fusion on the tape: raw + tanh(W_xa·a), W_xa of shape
/// (n1·n1·c)×2, applied to every channel.
inline Var encode_where(Tape& tape, Var raw, Var action, Var w_xa) {
  const Var offset = tape.tanh(tape.matvec(w_xa, action));
  return tape.add(raw, tape.reshape(offset, tape.value(raw).shape()));
}

inline Tensor encode_where(const Tensor& raw, Action a, const Tensor& w_xa) {
  Tape tape;
  const Var r = tape.constant(raw);
  const Var act = tape.constant(Tensor({2}, std::vector<double>{a.x, a.y}));
  const Var w = tape.constant(w_xa);
  return tape.value(encode_where(tape, r, act, w));
}

/// Average-pooled n1×n1 thumbnail of the whole image. Bin i spans rows
/// [floor(i·H/n1), floor((i+1)·H/n1)), likewise for columns.
inline Tensor low_res_overview(const Tensor& image, int n1) {
  if (image.rank() != 2) {
    throw InvalidArgument("low_res_overview: expected an H×W image, got " +
                          to_string(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1);
  if (n1 < 1 || h < static_cast<std::size_t>(n1) || w < static_cast<std::size_t>(n1)) {
    throw InvalidArgument("low_res_overview: image " + to_string(image.shape()) +
                          " is smaller than " + std::to_string(n1) + "×" + std::to_string(n1));
  }
  const auto n = static_cast<std::size_t>(n1);
  Tensor out({n, n});
  for (std::size_t u = 0; u < n; ++u) {
    const std::size_t r0 = u * h / n, r1 = (u + 1) * h / n;
    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t c0 = v * w / n, c1 = (v + 1) * w / n;
      double acc = 0.0;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) acc += image[r * w + c];
      }
      out.at(u, v) = acc / static_cast<double>((r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

/// Initial observation x_0: the thumbnail replicated across c channels.
inline Tensor overview_observation(const Tensor& thumbnail, std::size_t channels) {
  const std::size_t n = thumbnail.dim(0);
  Tensor out({n, thumbnail.dim(1), channels});
  for (std::size_t i = 0; i < thumbnail.size(); ++i) {
    for (std::size_t ch = 0; ch < channels; ++ch) out[i * channels + ch] = thumbnail[i];
  }
  return out;
}

}  // namespace red
