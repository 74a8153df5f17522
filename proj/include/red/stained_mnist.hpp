#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "red/errors.hpp"
#include "red/glimpse.hpp"
#include "red/rng.hpp"
#include "red/tensor.hpp"

namespace red {

/// Synthesis parameters in full-resolution pixels; scale_factor shrinks the
/// spatial ones (see scaled()).
struct StainConfig {
  std::size_t target_size = 7168;
  std::size_t smooth_kernel = 20;
  double grad_threshold = 0.2;
  double erosion_radius = 500;
  int stain_count_min = 10;
  int stain_count_max = 15;
  double stain_radius = 12;
  double stain_probability = 0.5;
  double scale_factor = 1.0;
  // Gradients are measured per source (28 px) pixel so the threshold does
  // not depend on the upscale factor.
  bool gradient_in_source_pixels = true;

  /// Spatial parameters after scale_factor, rounded to nearest, at least 1.
  StainConfig scaled() const {
    auto r = [&](double v) { return std::max(1.0, std::round(v * scale_factor)); };
    StainConfig s = *this;
    s.target_size = static_cast<std::size_t>(r(static_cast<double>(target_size)));
    s.smooth_kernel = static_cast<std::size_t>(r(static_cast<double>(smooth_kernel)));
    s.erosion_radius = r(erosion_radius);
    s.stain_radius = r(stain_radius);
    s.scale_factor = 1.0;
    return s;
  }

  void validate() const {
    if (!(scale_factor > 0.0)) throw ConfigError("stain: scale_factor must be positive");
    if (target_size < 1 || smooth_kernel < 1) throw ConfigError("stain: sizes must be positive");
    if (stain_count_min < 0 || stain_count_max < stain_count_min) {
      throw ConfigError("stain: invalid stain count range");
    }
    if (!(stain_probability > 0.0 && stain_probability < 1.0)) {
      throw ConfigError("stain: stain_probability must lie in (0, 1)");
    }
    if (!(erosion_radius >= 0.0) || !(stain_radius >= 0.0)) {
      throw ConfigError("stain: radii must be non-negative");
    }
  }
};

/// Bilinear resize to size×size (pixel-center convention, edge clamped),
/// output clamped to [0,1].
inline Tensor upscale_bilinear(const Tensor& img, std::size_t size) {
  if (img.rank() != 2) throw InvalidArgument("upscale_bilinear: expected an H×W image");
  const std::size_t h = img.dim(0), w = img.dim(1);
  if (size < std::max(h, w)) {
    throw InvalidArgument("upscale_bilinear: target " + std::to_string(size) +
                          " is smaller than the source");
  }
  auto coords = [size](std::size_t n) {
    std::vector<std::pair<std::size_t, double>> out(size);
    const double ratio = static_cast<double>(n) / static_cast<double>(size);
    for (std::size_t i = 0; i < size; ++i) {
      double s = (static_cast<double>(i) + 0.5) * ratio - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(n - 1));
      const auto i0 = std::min(static_cast<std::size_t>(s), n - 1);
      out[i] = {i0, s - static_cast<double>(i0)};
    }
    return out;
  };
  const auto rows = coords(h);
  const auto cols = coords(w);
  Tensor out({size, size});
  for (std::size_t r = 0; r < size; ++r) {
    const auto [r0, fr] = rows[r];
    const std::size_t r1 = std::min(r0 + 1, h - 1);
    for (std::size_t c = 0; c < size; ++c) {
      const auto [c0, fc] = cols[c];
      const std::size_t c1 = std::min(c0 + 1, w - 1);
      const double top = img.at(r0, c0) * (1 - fc) + img.at(r0, c1) * fc;
      const double bot = img.at(r1, c0) * (1 - fc) + img.at(r1, c1) * fc;
      out.at(r, c) = std::clamp(top * (1 - fr) + bot * fr, 0.0, 1.0);
    }
  }
  return out;
}

/// Normalized 1-D Gaussian taps, σ = ksize/4, symmetric about the kernel center.
inline std::vector<double> gaussian_taps(std::size_t ksize) {
  if (ksize < 1) throw InvalidArgument("gaussian_taps: kernel size must be positive");
  std::vector<double> taps(ksize);
  const double sigma = static_cast<double>(ksize) / 4.0;
  const double center = (static_cast<double>(ksize) - 1.0) / 2.0;
  double z = 0.0;
  for (std::size_t i = 0; i < ksize; ++i) {
    const double d = static_cast<double>(i) - center;
    taps[i] = std::exp(-d * d / (2 * sigma * sigma));
    z += taps[i];
  }
  for (double& t : taps) t /= z;
  return taps;
}

/// Separable Gaussian blur with zero padding. Anchor at ksize/2, so even
/// kernels shift by half a pixel.
inline Tensor gaussian_smooth(const Tensor& img, std::size_t ksize) {
  if (img.rank() != 2) throw InvalidArgument("gaussian_smooth: expected an H×W image");
  const std::vector<double> taps = gaussian_taps(ksize);
  if (ksize == 1) return img;
  const long h = static_cast<long>(img.dim(0)), w = static_cast<long>(img.dim(1));
  const long anchor = static_cast<long>(ksize / 2);
  Tensor tmp(img.shape()), out(img.shape());
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (long i = 0; i < static_cast<long>(ksize); ++i) {
        const long cc = c + i - anchor;
        if (cc >= 0 && cc < w) acc += taps[static_cast<std::size_t>(i)] * img.at(r, cc);
      }
      tmp.at(r, c) = acc;
    }
  }
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (long i = 0; i < static_cast<long>(ksize); ++i) {
        const long rr = r + i - anchor;
        if (rr >= 0 && rr < h) acc += taps[static_cast<std::size_t>(i)] * tmp.at(rr, c);
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

/// Gradient magnitude from central differences, one-sided at the borders.
inline Tensor central_gradient(const Tensor& img) {
  if (img.rank() != 2 || img.dim(0) < 3 || img.dim(1) < 3) {
    throw InvalidArgument("central_gradient: expected an image of at least 3×3");
  }
  const std::size_t h = img.dim(0), w = img.dim(1);
  auto diff = [](double lo, double hi, std::size_t span) { return (hi - lo) / static_cast<double>(span); };
  Tensor g({h, w});
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t r0 = r == 0 ? 0 : r - 1, r1 = r + 1 == h ? r : r + 1;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t c0 = c == 0 ? 0 : c - 1, c1 = c + 1 == w ? c : c + 1;
      const double gx = diff(img.at(r, c0), img.at(r, c1), c1 - c0);
      const double gy = diff(img.at(r0, c), img.at(r1, c), r1 - r0);
      g.at(r, c) = std::hypot(gx, gy);
    }
  }
  return g;
}

namespace detail {

// Felzenszwalb–Huttenlocher lower envelope, squared distances along one line.
inline void edt_1d(const double* f, double* d, std::size_t n, std::vector<long>& v,
                   std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  long k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    const double qd = static_cast<double>(q);
    while (k >= 0) {
      const double p = static_cast<double>(v[static_cast<std::size_t>(k)]);
      const double s = ((f[q] + qd * qd) - (f[static_cast<std::size_t>(p)] + p * p)) / (2 * qd - 2 * p);
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = static_cast<long>(q);
    if (k == 0) {
      z[0] = -inf;
    } else {
      const double p = static_cast<double>(v[static_cast<std::size_t>(k - 1)]);
      z[static_cast<std::size_t>(k)] =
          ((f[q] + qd * qd) - (f[static_cast<std::size_t>(p)] + p * p)) / (2 * qd - 2 * p);
    }
    z[static_cast<std::size_t>(k) + 1] = inf;
  }
  if (k < 0) {
    std::fill(d, d + n, inf);
    return;
  }
  long j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j) + 1] < static_cast<double>(q)) ++j;
    const double p = static_cast<double>(v[static_cast<std::size_t>(j)]);
    const double dq = static_cast<double>(q) - p;
    d[q] = dq * dq + f[static_cast<std::size_t>(p)];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance to the nearest nonzero mask pixel
/// (infinity when the mask is empty).
inline Tensor squared_distance_transform(const Tensor& mask) {
  if (mask.rank() != 2) throw InvalidArgument("distance transform: expected an H×W mask");
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  constexpr double inf = std::numeric_limits<double>::infinity();
  Tensor d({h, w});
  std::vector<double> f(std::max(h, w)), out(std::max(h, w));
  std::vector<long> v;
  std::vector<double> z;
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t r = 0; r < h; ++r) f[r] = mask.at(r, c) != 0.0 ? 0.0 : inf;
    detail::edt_1d(f.data(), out.data(), h, v, z);
    for (std::size_t r = 0; r < h; ++r) d.at(r, c) = out[r];
  }
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) f[c] = d.at(r, c);
    detail::edt_1d(f.data(), out.data(), w, v, z);
    for (std::size_t c = 0; c < w; ++c) d.at(r, c) = out[c];
  }
  return d;
}

/// Zeroes every pixel within Euclidean distance `radius` of a mask pixel.
inline Tensor zero_near(const Tensor& img, const Tensor& mask, double radius) {
  require_same_shape(img, mask, "zero_near");
  const Tensor d2 = squared_distance_transform(mask);
  Tensor out = img;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (d2[i] <= r2) out[i] = 0.0;
  }
  return out;
}

/// 1 where gradient·scale ≥ threshold.
inline Tensor high_gradient_mask(const Tensor& gradient, double threshold, double scale = 1.0) {
  Tensor m(gradient.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = gradient[i] * scale >= threshold ? 1.0 : 0.0;
  return m;
}

/// Erases writing within `radius` of any high-gradient pixel, leaving only
/// the cores of thick strokes.
inline Tensor thin_writings(const Tensor& img, double grad_threshold, double radius,
                            double gradient_scale = 1.0) {
  const Tensor mask = high_gradient_mask(central_gradient(img), grad_threshold, gradient_scale);
  return zero_near(img, mask, radius);
}

struct StainResult {
  Tensor image;
  int count = 0;
  std::vector<PixelIndex> centers;
};

/// Plants `count ~ U{min..max}` disks of value 1.0 centered on distinct
/// high-gradient pixels of `img`.
template <class RngT>
StainResult add_stains(const Tensor& img, const StainConfig& scaled, RngT& rng,
                       double gradient_scale = 1.0) {
  const Tensor g = central_gradient(img);
  const std::size_t h = img.dim(0), w = img.dim(1);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] * gradient_scale >= scaled.grad_threshold) candidates.push_back(i);
  }
  std::uniform_int_distribution<int> count_dist(scaled.stain_count_min, scaled.stain_count_max);
  StainResult res{img, count_dist(rng), {}};
  if (candidates.size() < static_cast<std::size_t>(res.count)) {
    throw SynthesisError("only " + std::to_string(candidates.size()) +
                         " high-gradient pixels for " + std::to_string(res.count) + " stains");
  }
  std::vector<std::size_t> chosen;
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen),
              static_cast<std::ptrdiff_t>(res.count), rng);
  const double r = scaled.stain_radius;
  const long ri = static_cast<long>(std::floor(r));
  for (std::size_t idx : chosen) {
    const long cr = static_cast<long>(idx / w), cc = static_cast<long>(idx % w);
    res.centers.push_back({cr, cc});
    for (long dr = -ri; dr <= ri; ++dr) {
      for (long dc = -ri; dc <= ri; ++dc) {
        const long rr = cr + dr, c2 = cc + dc;
        if (rr < 0 || c2 < 0 || rr >= static_cast<long>(h) || c2 >= static_cast<long>(w)) continue;
        if (static_cast<double>(dr * dr + dc * dc) <= r * r) {
          res.image.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(c2)) = 1.0;
        }
      }
    }
  }
  return res;
}

struct LabeledImage {
  Tensor image;
  int label = 0;
  std::uint64_t seed = 0;
  std::size_t digit_index = 0;
  int stain_count = 0;
  std::vector<PixelIndex> stain_centers;
};

/// Upscale, smooth, thin, and with probability stain_probability add stains.
/// `stream` drives the label draw and the stain sampling.
template <class RngT>
LabeledImage synthesize_one(const Tensor& digit, const StainConfig& cfg, RngT& stream) {
  cfg.validate();
  const StainConfig s = cfg.scaled();
  const double gscale =
      cfg.gradient_in_source_pixels ? static_cast<double>(s.target_size) / static_cast<double>(digit.dim(0))
                                    : 1.0;
  Tensor img = gaussian_smooth(upscale_bilinear(digit, s.target_size), s.smooth_kernel);
  img = thin_writings(img, s.grad_threshold, s.erosion_radius, gscale);
  if (img.max() <= 0.0) throw SynthesisError("digit vanished after thinning");
  LabeledImage out;
  std::bernoulli_distribution stained(s.stain_probability);
  if (stained(stream)) {
    StainResult r = add_stains(img, s, stream, gscale);
    out.image = std::move(r.image);
    out.label = 1;
    out.stain_count = r.count;
    out.stain_centers = std::move(r.centers);
  } else {
    out.image = std::move(img);
  }
  return out;
}

/// One image per source digit (cycling when n exceeds the source count).
/// Digits that fail synthesis are reported through `on_skip` and skipped.
inline std::vector<LabeledImage> synthesize_dataset(
    const std::vector<Tensor>& digits, const StainConfig& cfg, std::size_t n, std::uint64_t seed,
    const std::function<void(std::size_t, const std::string&)>& on_skip = {}) {
  if (digits.empty()) throw SynthesisError("no source digits");
  std::vector<LabeledImage> out;
  const std::size_t attempts = n + digits.size();
  for (std::size_t i = 0; out.size() < n && i < attempts; ++i) {
    const std::size_t idx = i % digits.size();
    Rng stream = derive_stream(seed, idx, i / digits.size());
    try {
      LabeledImage li = synthesize_one(digits[idx], cfg, stream);
      li.seed = seed;
      li.digit_index = idx;
      out.push_back(std::move(li));
    } catch (const SynthesisError& e) {
      if (on_skip) on_skip(idx, e.what());
    }
  }
  return out;
}

}  // namespace red
