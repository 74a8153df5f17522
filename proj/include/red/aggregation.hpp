#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "red/errors.hpp"
#include "red/tape.hpp"
#include "red/tensor.hpp"

namespace red {

/// k-maximum aggregation: the final prediction is the (1 − γ^t)-weighted mean
/// of the k largest temporary predictions with t0 ≤ t ≤ T (t is 1-based).
struct AggregationConfig {
  int k = 25;
  double gamma = 0.95;
  int t0 = 10;
  int horizon = 350;

  void validate() const {
    if (k < 1) throw ConfigError("aggregation: k must be at least 1");
    if (t0 < 1) throw ConfigError("aggregation: t0 must be at least 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("aggregation: gamma must lie in [0, 1)");
    if (horizon - t0 + 1 < k) {
      throw ConfigError("aggregation: only " + std::to_string(std::max(0, horizon - t0 + 1)) +
                        " steps in [t0, T] for k = " + std::to_string(k));
    }
  }
};

/// ŷ = ½(1 + tanh(W_ys·flatten(s))), W_ys of shape 1×(n1·n1·C_s).
inline Var temp_predict(Tape& tape, Var state, Var w_ys) {
  return tape.affine(tape.tanh(tape.matvec(w_ys, state)), 0.5, 0.5);
}

inline double temp_predict(const Tensor& state, const Tensor& w_ys) {
  Tape tape;
  return tape.value(temp_predict(tape, tape.constant(state), tape.constant(w_ys)))[0];
}

/// Selected steps (1-based) and their normalized weights.
struct Aggregate {
  double value = 0.0;
  std::vector<int> steps;        // K, ascending
  std::vector<double> weights;   // (1 − γ^t) / Z, aligned with steps
};

/// Top-k over t in [t0, T]; ties go to the smaller t.
inline Aggregate k_max_aggregate(std::span<const double> yhat, const AggregationConfig& cfg) {
  AggregationConfig c = cfg;
  c.horizon = static_cast<int>(yhat.size());
  c.validate();
  std::vector<int> cand(static_cast<std::size_t>(c.horizon - c.t0 + 1));
  std::iota(cand.begin(), cand.end(), c.t0);
  const auto k = static_cast<std::size_t>(c.k);
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                    [&](int a, int b) {
                      const double ya = yhat[static_cast<std::size_t>(a - 1)];
                      const double yb = yhat[static_cast<std::size_t>(b - 1)];
                      return ya > yb || (ya == yb && a < b);
                    });
  Aggregate out;
  out.steps.assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.steps.begin(), out.steps.end());
  double z = 0.0, acc = 0.0;
  for (int t : out.steps) {
    const double w = 1.0 - std::pow(c.gamma, t);
    z += w;
    acc += w * yhat[static_cast<std::size_t>(t - 1)];
    out.weights.push_back(w);
  }
  for (double& w : out.weights) w /= z;
  out.value = acc / z;
  return out;
}

/// dŶ/dŷ_t scaled by `upstream`, with the selected set held fixed.
inline std::vector<double> aggregate_gradient(std::span<const double> yhat,
                                              const AggregationConfig& cfg, double upstream = 1.0) {
  const Aggregate agg = k_max_aggregate(yhat, cfg);
  std::vector<double> g(yhat.size(), 0.0);
  for (std::size_t i = 0; i < agg.steps.size(); ++i) {
    g[static_cast<std::size_t>(agg.steps[i] - 1)] = upstream * agg.weights[i];
  }
  return g;
}

/// Records Ŷ on the tape as a fixed weighted sum over the selected steps.
inline Var k_max_aggregate(Tape& tape, std::span<const Var> yhat, const AggregationConfig& cfg) {
  std::vector<double> values;
  values.reserve(yhat.size());
  for (Var v : yhat) values.push_back(tape.value(v)[0]);
  const std::vector<double> w = aggregate_gradient(values, cfg);
  return tape.weighted_sum(yhat, w);
}

}  // namespace red
