#pragma once

// Synthetic 28×28 "digits" with strokes thick enough to survive thinning.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "red/mnist.hpp"
#include "red/tensor.hpp"

namespace red::test {

/// Variant 0: ring, 1: vertical bar, 2: plus sign, 3: block L.
inline Tensor thick_digit(int variant) {
  Tensor d({28, 28});
  for (std::size_t r = 0; r < 28; ++r) {
    for (std::size_t c = 0; c < 28; ++c) {
      const double y = static_cast<double>(r) - 13.5, x = static_cast<double>(c) - 13.5;
      bool on = false;
      switch (variant % 4) {
        case 0: {
          const double rad = std::hypot(x, y);
          on = rad >= 4.0 && rad <= 12.0;
          break;
        }
        case 1: on = std::abs(x) <= 5.0 && std::abs(y) <= 11.0; break;
        case 2: on = (std::abs(x) <= 4.5 && std::abs(y) <= 11.0) || (std::abs(y) <= 4.5 && std::abs(x) <= 11.0); break;
        default: on = (x >= -10 && x <= -1 && std::abs(y) <= 11.0) || (y >= 2 && y <= 11 && x >= -10 && x <= 10); break;
      }
      d.at(r, c) = on ? 1.0 : 0.0;
    }
  }
  return d;
}

inline std::vector<Tensor> thick_digits(std::size_t n) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(thick_digit(static_cast<int>(i)));
  return out;
}

/// Writes an IDX image file of thick digits and returns its path.
inline std::filesystem::path write_digit_idx(const std::filesystem::path& dir, std::size_t n) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "digits-idx3-ubyte";
  write_idx_images(path, thick_digits(n));
  return path;
}

}  // namespace red::test
