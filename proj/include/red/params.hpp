#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <utility>

#include "red/aggregation.hpp"
#include "red/conv_gru.hpp"
#include "red/errors.hpp"
#include "red/glimpse.hpp"
#include "red/tensor.hpp"

namespace red {

/// How ∇μ_t enters the score-function term.
enum class ScoreChaining {
  full,       // through the whole recurrent graph
  immediate,  // through W_as only, state treated as constant
};

inline std::string_view to_string(ScoreChaining c) {
  return c == ScoreChaining::full ? "full" : "immediate";
}

/// Everything that shapes one episode and its update.
struct EpisodeConfig {
  GlimpseConfig glimpse;
  std::size_t state_channels = 8;
  std::size_t kernel_size = 3;
  AggregationConfig aggregation;  // horizon T lives here
  double beta = 0.15;             // exploration std-dev
  double learning_rate = 1e-3;
  double momentum = 0.0;
  int baseline_samples = 15;      // m
  ScoreChaining chaining = ScoreChaining::full;
  bool random_actions = false;    // attention ablation

  int horizon() const { return aggregation.horizon; }
  std::size_t n1() const { return static_cast<std::size_t>(glimpse.base()); }

  void validate() const {
    glimpse.validate();
    aggregation.validate();
    if (state_channels < 1) throw ConfigError("state_channels must be at least 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be non-negative");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (baseline_samples < 1) throw ConfigError("baseline_samples must be at least 1");
  }
};

/// All trainable weight groups.
struct ModelParams {
  Tensor w_xa;  // (n1·n1·c)×2, where pathway
  GruParams gru;
  Tensor w_as;  // 2×(n1·n1·C_s), action mean
  Tensor w_ys;  // 1×(n1·n1·C_s), temporary prediction

  static ModelParams zeros(const EpisodeConfig& cfg) {
    const std::size_t n1 = cfg.n1(), c = cfg.glimpse.channels(), cs = cfg.state_channels;
    return {Tensor({n1 * n1 * c, 2}), GruParams::zeros(c, cs, cfg.kernel_size),
            Tensor({2, n1 * n1 * cs}), Tensor({1, n1 * n1 * cs})};
  }

  /// W_xa uniform in ±0.01, everything else uniform in ±1/sqrt(fan-in).
  template <class Rng>
  static ModelParams random(const EpisodeConfig& cfg, Rng& rng) {
    ModelParams p = zeros(cfg);
    p.gru = GruParams::random(cfg.glimpse.channels(), cfg.state_channels, cfg.kernel_size, rng);
    std::uniform_real_distribution<double> small(-0.01, 0.01);
    for (double& v : p.w_xa.values()) v = small(rng);
    for (Tensor* t : {&p.w_as, &p.w_ys}) {
      const double r = 1.0 / std::sqrt(static_cast<double>(t->dim(1)));
      std::uniform_real_distribution<double> u(-r, r);
      for (double& v : t->values()) v = u(rng);
    }
    return p;
  }

  /// Visits (name, tensor) for every group in a fixed order.
  template <class F>
  void for_each(F&& f) {
    f(std::string_view("W_xa"), w_xa);
    f(std::string_view("W_zh"), gru.w_zh);
    f(std::string_view("W_zx"), gru.w_zx);
    f(std::string_view("W_rh"), gru.w_rh);
    f(std::string_view("W_rx"), gru.w_rx);
    f(std::string_view("W_sh"), gru.w_sh);
    f(std::string_view("W_sx"), gru.w_sx);
    f(std::string_view("W_as"), w_as);
    f(std::string_view("W_ys"), w_ys);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](std::string_view name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }

  std::size_t size() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const Tensor& t) { n += t.size(); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](std::string_view, const Tensor& t) { ok = ok && t.all_finite(); });
    return ok;
  }

  bool same_shapes(const ModelParams& other) const {
    std::vector<Shape> mine;
    for_each([&](std::string_view, const Tensor& t) { mine.push_back(t.shape()); });
    std::size_t i = 0;
    bool ok = true;
    other.for_each([&](std::string_view, const Tensor& t) { ok = ok && mine[i++] == t.shape(); });
    return ok;
  }

  /// Checks group shapes against an episode configuration.
  void check_against(const EpisodeConfig& cfg) const {
    if (!same_shapes(zeros(cfg))) {
      throw InvalidArgument("model parameters do not match the episode configuration");
    }
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    bool eq = true;
    std::vector<const Tensor*> mine;
    a.for_each([&](std::string_view, const Tensor& t) { mine.push_back(&t); });
    std::size_t i = 0;
    b.for_each([&](std::string_view, const Tensor& t) { eq = eq && *mine[i++] == t; });
    return eq;
  }
};

/// Same-shaped gradient / velocity containers reuse ModelParams.
using ParamGrads = ModelParams;

}  // namespace red
