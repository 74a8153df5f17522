#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "red/errors.hpp"

namespace red {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate.
/// f must be deterministic: any noise inside it must be frozen.
template <class F>
std::vector<double> central_difference(F&& f, std::span<const double> x, double step) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> out(probe.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double keep = probe[i];
    probe[i] = keep + step;
    const double up = f(std::span<const double>(probe));
    probe[i] = keep - step;
    const double down = f(std::span<const double>(probe));
    probe[i] = keep;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

/// max_i |analytic_i - numeric_i| / max(1e-8, |numeric_i|)
inline GradCheckResult compare_gradients(std::span<const double> analytic,
                                         std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw InvalidArgument("gradient check: analytic and numeric sizes differ");
  }
  GradCheckResult r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err = std::abs(analytic[i] - numeric[i]) / std::max(1e-8, std::abs(numeric[i]));
    if (err > r.max_rel_error || i == 0) {
      r.max_rel_error = std::max(r.max_rel_error, err);
      r.worst_index = i;
      r.analytic = analytic[i];
      r.numeric = numeric[i];
    }
  }
  return r;
}

/// Checks an analytic gradient of f at x against central differences.
template <class F>
GradCheckResult finite_diff_check(F&& f, std::span<const double> x,
                                  std::span<const double> analytic, double step = 1e-5) {
  const auto numeric = central_difference(f, x, step);
  return compare_gradients(analytic, numeric);
}

}  // namespace red
