#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "red/errors.hpp"

namespace red {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

/// Dense row-major array of doubles. Images are H×W, feature maps H×W×C
/// (channel fastest), convolution kernels kh×kw×Cin×Cout and linear maps
/// out×in.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw InvalidArgument("tensor shape " + red::to_string(shape_) + " does not hold " +
                            std::to_string(data_.size()) + " values");
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data_[(r * shape_[1] + c) * shape_[2] + ch];
  }
  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data_[(r * shape_[1] + c) * shape_[2] + ch];
  }

  /// Same values under a new shape of equal size.
  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      throw InvalidArgument("cannot reshape " + red::to_string(shape_) + " to " +
                            red::to_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " + to_string(a.shape()) +
                          " vs " + to_string(b.shape()));
  }
}

/// Zero-padded "same" convolution (cross-correlation, as in every deep
/// learning framework). input H×W×Cin, kernel kh×kw×Cin×Cout, odd kh, kw.
inline Tensor conv2d_same(const Tensor& input, const Tensor& kernel) {
  if (input.rank() != 3 || kernel.rank() != 4) {
    throw InvalidArgument("conv2d_same: expected H×W×Cin input and kh×kw×Cin×Cout kernel, got " +
                          to_string(input.shape()) + " and " + to_string(kernel.shape()));
  }
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
  if (kernel.dim(2) != cin) {
    throw InvalidArgument("conv2d_same: kernel expects " + std::to_string(kernel.dim(2)) +
                          " input channels, input has " + std::to_string(cin));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw InvalidArgument("conv2d_same: kernel extents must be odd, got " +
                          to_string(kernel.shape()));
  }
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  Tensor out({h, w, cout});
  const double* in = input.data().data();
  const double* k = kernel.data().data();
  double* o = out.data().data();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double* orow = o + (r * w + c) * cout;
      for (std::size_t i = 0; i < kh; ++i) {
        const auto rr = static_cast<std::ptrdiff_t>(r + i) - ph;
        if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t j = 0; j < kw; ++j) {
          const auto cc = static_cast<std::ptrdiff_t>(c + j) - pw;
          if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* px = in + (static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)) * cin;
          const double* kk = k + (i * kw + j) * cin * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double v = px[ci];
            if (v == 0.0) continue;
            const double* krow = kk + ci * cout;
            for (std::size_t co = 0; co < cout; ++co) orow[co] += v * krow[co];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace red
