#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "red/aggregation.hpp"
#include "red/conv_gru.hpp"
#include "red/errors.hpp"
#include "red/glimpse.hpp"
#include "red/params.hpp"
#include "red/rng.hpp"
#include "red/tape.hpp"
#include "red/tensor.hpp"

namespace red {

/// An image prepared for episodes: the pixels plus the initial observation x_0.
/// The thumbnail is computed once per image, outside the per-episode budget.
struct Scene {
  Tensor image;
  Tensor overview;  // n1×n1×c

  static Scene make(Tensor image, const EpisodeConfig& cfg) {
    Tensor thumb = low_res_overview(image, cfg.glimpse.base());
    Tensor x0 = overview_observation(thumb, cfg.glimpse.channels());
    return {std::move(image), std::move(x0)};
  }
};

// ---- action policy ---------------------------------------------------------

struct ActionSample {
  Action action;  // clamped to [-1, 1]², what the sensor sees
  Action mean;    // μ = tanh(W_as·flatten(s))
  Action raw;     // μ + ε before clamping, what the density is evaluated at
};

inline Var action_mean(Tape& tape, Var state, Var w_as) {
  return tape.tanh(tape.matvec(w_as, state));
}

inline ActionSample select_action(const Tensor& state, const Tensor& w_as, Action noise) {
  Tape tape;
  const Tensor& mu = tape.value(action_mean(tape, tape.constant(state), tape.constant(w_as)));
  const Action mean{mu[0], mu[1]};
  const Action raw{mean.x + noise.x, mean.y + noise.y};
  return {{std::clamp(raw.x, -1.0, 1.0), std::clamp(raw.y, -1.0, 1.0)}, mean, raw};
}

inline double regret(double prediction, int label) {
  const double d = prediction - static_cast<double>(label);
  return d * d;
}

/// ∂/∂μ log N(a; μ, β²I) = (a − μ)/β².
inline std::array<double, 2> log_prob_grad(Action a, Action mean, double beta) {
  if (!(beta > 0.0)) throw ConfigError("log_prob_grad: beta must be positive");
  const double inv = 1.0 / (beta * beta);
  return {(a.x - mean.x) * inv, (a.y - mean.y) * inv};
}

inline double log_prob(Action a, Action mean, double beta) {
  if (!(beta > 0.0)) throw ConfigError("log_prob: beta must be positive");
  const double dx = a.x - mean.x, dy = a.y - mean.y;
  return -(dx * dx + dy * dy) / (2.0 * beta * beta) - std::log(2.0 * std::numbers::pi * beta * beta);
}

// ---- rollout ---------------------------------------------------------------

/// Trainable leaves of one tape.
struct ParamVars {
  Var w_xa;
  GruVars gru;
  Var w_as, w_ys;
};

inline ParamVars record(Tape& tape, const ModelParams& p, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  ParamVars v;
  v.w_xa = put(p.w_xa);
  v.gru = record(tape, p.gru, trainable);
  v.w_as = put(p.w_as);
  v.w_ys = put(p.w_ys);
  return v;
}

struct RolloutOptions {
  bool record_gradients = true;
  bool keep_history = true;
  /// Evaluation: ε ≡ 0 regardless of β.
  bool deterministic = false;
  /// Horizon override (0 keeps cfg); used by long heatmap rollouts.
  int steps = 0;
  /// Skip k-max aggregation and regret (heatmap rollouts).
  bool aggregate = true;
  /// Reparameterized pathwise mode: a_t = clamp(μ_t + ε_t) stays on the tape
  /// so ∇Ŷ also flows through the action into the where pathway.
  bool differentiate_actions = false;
  /// Pre-drawn exploration noise ε_1..ε_T (common random numbers).
  const std::vector<Action>* noise = nullptr;
  /// Actions to take instead of sampling (finite-difference oracles).
  const std::vector<Action>* forced_actions = nullptr;
  /// Crop centers to use instead of the ones the actions map to.
  const std::vector<PixelIndex>* frozen_centers = nullptr;
  PixelCounter* counter = nullptr;
  /// Called with (t, state value) after every GRU update, t = 0..T.
  std::function<void(int, const Tensor&)> on_state;
};

/// One episode on one image. Histories are indexed as in the model: states
/// s_0..s_T (s_0 is the state after consuming x_0), observations x_0..x_T,
/// actions and temporary predictions for t = 1..T.
struct Trajectory {
  int label = 0;
  std::vector<Action> actions;
  std::vector<Action> raw_actions;
  std::vector<Action> means;
  std::vector<Action> noise;
  std::vector<PixelIndex> centers;
  std::vector<Tensor> observations;
  std::vector<Tensor> states;
  std::vector<double> yhat;
  double prediction = 0.5;
  double regret = 0.0;
  double reward = 1.0;
  bool has_score_term = false;

  // Gradient record (empty when rolled out without gradients).
  std::unique_ptr<Tape> tape;
  ParamVars vars;
  Var prediction_var;
  Var log_prob_var;
};

inline Trajectory rollout(const Scene& scene, int label, const ModelParams& params,
                          const EpisodeConfig& cfg, Rng& rng, const RolloutOptions& opt = {}) {
  const int horizon = opt.steps > 0 ? opt.steps : cfg.horizon();
  if (opt.aggregate) {
    AggregationConfig agg = cfg.aggregation;
    agg.horizon = horizon;
    agg.validate();
  }
  cfg.glimpse.validate();
  params.check_against(cfg);
  if (scene.overview.shape() != Shape{cfg.n1(), cfg.n1(), cfg.glimpse.channels()}) {
    throw InvalidArgument("rollout: scene was prepared for a different glimpse configuration");
  }

  Trajectory tr;
  tr.label = label;
  tr.tape = std::make_unique<Tape>();
  Tape& tape = *tr.tape;
  const bool grads = opt.record_gradients;
  tr.vars = record(tape, params, grads);
  const ParamVars& pv = tr.vars;

  const double beta = opt.deterministic ? 0.0 : cfg.beta;
  const bool stochastic = beta > 0.0 && !cfg.random_actions;
  const bool score = grads && stochastic;
  tr.has_score_term = score;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  Var state = tape.constant(init_state(cfg.n1(), cfg.state_channels));
  Var x = tape.constant(scene.overview);
  state = gru_step(tape, state, x, pv.gru);
  if (opt.on_state) opt.on_state(0, tape.value(state));
  if (opt.keep_history) {
    tr.observations.push_back(scene.overview);
    tr.states.push_back(tape.value(state));
  }

  std::vector<Var> yhat_vars;
  std::vector<Var> log_terms;
  const double log_scale = score ? -1.0 / (2.0 * beta * beta) : 0.0;

  for (int t = 1; t <= horizon; ++t) {
    Action eps{0.0, 0.0};
    Var mu;
    Action mean{0.0, 0.0}, raw{0.0, 0.0};
    if (cfg.random_actions) {
      raw = {uniform(rng), uniform(rng)};
      mean = raw;
    } else {
      if (opt.noise) {
        eps = opt.noise->at(static_cast<std::size_t>(t - 1));
      } else if (stochastic) {
        eps = {beta * normal(rng), beta * normal(rng)};
      }
      const Var s_in =
          cfg.chaining == ScoreChaining::full || !grads ? state : tape.constant(tape.value(state));
      mu = action_mean(tape, s_in, pv.w_as);
      mean = {tape.value(mu)[0], tape.value(mu)[1]};
      raw = opt.forced_actions ? opt.forced_actions->at(static_cast<std::size_t>(t - 1))
                               : Action{mean.x + eps.x, mean.y + eps.y};
      if (score) {
        const Var target = tape.constant(Tensor({2}, std::vector<double>{raw.x, raw.y}));
        log_terms.push_back(tape.sum(tape.square(tape.sub(target, mu))));
      }
    }
    const Action act{std::clamp(raw.x, -1.0, 1.0), std::clamp(raw.y, -1.0, 1.0)};

    Var a_var;
    if (opt.differentiate_actions && grads && !cfg.random_actions) {
      const Var e = tape.constant(Tensor({2}, std::vector<double>{eps.x, eps.y}));
      a_var = tape.clamp(tape.add(mu, e), -1.0, 1.0);
    } else {
      a_var = tape.constant(Tensor({2}, std::vector<double>{act.x, act.y}));
    }

    const PixelIndex center =
        opt.frozen_centers
            ? opt.frozen_centers->at(static_cast<std::size_t>(t - 1))
            : snap(to_pixel(act, scene.image.dim(0), scene.image.dim(1)));
    const Var raw_glimpse =
        tape.constant(extract_glimpse_at(scene.image, center, cfg.glimpse, opt.counter));
    x = encode_where(tape, raw_glimpse, a_var, pv.w_xa);
    state = gru_step(tape, state, x, pv.gru);
    if (opt.on_state) opt.on_state(t, tape.value(state));

    tr.actions.push_back(act);
    tr.raw_actions.push_back(raw);
    tr.means.push_back(mean);
    tr.noise.push_back(eps);
    tr.centers.push_back(center);
    if (opt.keep_history) {
      tr.observations.push_back(tape.value(x));
      tr.states.push_back(tape.value(state));
    }
    if (opt.aggregate) {
      const Var y = temp_predict(tape, state, pv.w_ys);
      yhat_vars.push_back(y);
      tr.yhat.push_back(tape.value(y)[0]);
    }
    if (!grads && !opt.keep_history) {
      // Forward-only: keep just the live state to bound memory on long rollouts.
      Tensor s = tape.value(state);
      tape.clear();
      tr.vars = record(tape, params, false);
      state = tape.constant(std::move(s));
      yhat_vars.clear();
    }
  }

  if (opt.aggregate) {
    if (!grads && !opt.keep_history) {
      tr.prediction = k_max_aggregate(tr.yhat, [&] {
                        AggregationConfig a = cfg.aggregation;
                        a.horizon = horizon;
                        return a;
                      }()).value;
    } else {
      AggregationConfig agg = cfg.aggregation;
      agg.horizon = horizon;
      tr.prediction_var = k_max_aggregate(tape, yhat_vars, agg);
      tr.prediction = tape.value(tr.prediction_var)[0];
    }
    tr.regret = regret(tr.prediction, label);
    tr.reward = 1.0 - tr.regret;
  }
  if (score && !log_terms.empty()) {
    const std::vector<double> w(log_terms.size(), log_scale);
    tr.log_prob_var = tape.weighted_sum(log_terms, w);
  }
  if (!grads) tr.tape.reset();
  return tr;
}

/// Mean regret over m independent rollouts; a constant for differentiation.
inline double estimate_baseline(const Scene& scene, int label, const ModelParams& params,
                                const EpisodeConfig& cfg, int m, Rng& rng) {
  if (m < 1) throw ConfigError("estimate_baseline: m must be at least 1");
  RolloutOptions opt;
  opt.record_gradients = false;
  opt.keep_history = false;
  double total = 0.0;
  for (int i = 0; i < m; ++i) total += rollout(scene, label, params, cfg, rng, opt).regret;
  return total / m;
}

// ---- gradient estimate -----------------------------------------------------

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.for_each([](std::string_view, Tensor& t) { t.fill(0.0); });
  return z;
}

/// dst += scale·src, group by group.
inline void axpy(ModelParams& dst, const ModelParams& src, double scale) {
  std::vector<const Tensor*> s;
  src.for_each([&](std::string_view, const Tensor& t) { s.push_back(&t); });
  std::size_t i = 0;
  dst.for_each([&](std::string_view, Tensor& t) {
    const Tensor& g = *s[i++];
    require_same_shape(t, g, "axpy");
    for (std::size_t j = 0; j < t.size(); ++j) t[j] += scale * g[j];
  });
}

struct GradientEstimate {
  ParamGrads total;
  ParamGrads score;     // ((L − b)·∇log P) part, filled when split
  ParamGrads pathwise;  // 2(Ŷ − Y)·∇Ŷ part, filled when split
  double mean_regret = 0.0;
  double baseline = 0.0;
};

inline ParamGrads collect(const Tape& tape, const ParamVars& v) {
  ParamGrads g;
  g.w_xa = tape.grad(v.w_xa);
  g.gru = {tape.grad(v.gru.w_zh), tape.grad(v.gru.w_zx), tape.grad(v.gru.w_rh),
           tape.grad(v.gru.w_rx), tape.grad(v.gru.w_sh), tape.grad(v.gru.w_sx)};
  g.w_as = tape.grad(v.w_as);
  g.w_ys = tape.grad(v.w_ys);
  return g;
}

/// Per rollout: (L − b)·Σ_t ∇log P(a_t|W) + 2(Ŷ − Y)·∇Ŷ, averaged over the
/// rollouts. Crop indexing is not differentiated.
inline GradientEstimate policy_gradient(std::span<Trajectory> trajectories, double baseline,
                                        const ModelParams& params, bool split_terms = false) {
  if (trajectories.empty()) throw InvalidArgument("policy_gradient: no trajectories");
  GradientEstimate est;
  est.total = zeros_like(params);
  if (split_terms) {
    est.score = zeros_like(params);
    est.pathwise = zeros_like(params);
  }
  est.baseline = baseline;
  const double inv = 1.0 / static_cast<double>(trajectories.size());
  for (Trajectory& tr : trajectories) {
    if (!tr.tape || !tr.prediction_var.valid()) {
      throw InvalidArgument("policy_gradient: trajectory was recorded without gradients");
    }
    ModelParams shapes;
    shapes.w_xa = tr.tape->value(tr.vars.w_xa);
    shapes.gru = {tr.tape->value(tr.vars.gru.w_zh), tr.tape->value(tr.vars.gru.w_zx),
                  tr.tape->value(tr.vars.gru.w_rh), tr.tape->value(tr.vars.gru.w_rx),
                  tr.tape->value(tr.vars.gru.w_sh), tr.tape->value(tr.vars.gru.w_sx)};
    shapes.w_as = tr.tape->value(tr.vars.w_as);
    shapes.w_ys = tr.tape->value(tr.vars.w_ys);
    if (!shapes.same_shapes(params)) {
      throw InvalidArgument("policy_gradient: trajectory parameters do not match");
    }
    est.mean_regret += tr.regret * inv;
    const double c_score = tr.regret - baseline;
    const double c_path = 2.0 * (tr.prediction - static_cast<double>(tr.label));
    const bool has_score = tr.has_score_term && tr.log_prob_var.valid();
    if (split_terms) {
      tr.tape->backward(tr.prediction_var);
      ParamGrads gp = collect(*tr.tape, tr.vars);
      axpy(est.pathwise, gp, c_path * inv);
      axpy(est.total, gp, c_path * inv);
      if (has_score) {
        tr.tape->backward(tr.log_prob_var);
        ParamGrads gs = collect(*tr.tape, tr.vars);
        axpy(est.score, gs, c_score * inv);
        axpy(est.total, gs, c_score * inv);
      }
    } else {
      std::vector<std::pair<Var, double>> seeds{{tr.prediction_var, c_path}};
      if (has_score) seeds.emplace_back(tr.log_prob_var, c_score);
      tr.tape->backward(seeds);
      axpy(est.total, collect(*tr.tape, tr.vars), inv);
    }
  }
  return est;
}

// ---- update ----------------------------------------------------------------

/// W ← W − α·g
inline void apply_update(ModelParams& params, const ParamGrads& g, double alpha) {
  axpy(params, g, -alpha);
}

/// Gradient descent with optional heavy-ball momentum (v ← μv + g; W ← W − αv).
class Optimizer {
 public:
  Optimizer(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}

  void step(ModelParams& params, const ParamGrads& g) {
    if (momentum_ == 0.0) {
      apply_update(params, g, lr_);
      return;
    }
    if (!velocity_) velocity_ = zeros_like(params);
    velocity_->for_each([&](std::string_view, Tensor& t) {
      for (double& v : t.values()) v *= momentum_;
    });
    axpy(*velocity_, g, 1.0);
    apply_update(params, *velocity_, lr_);
  }

  const std::optional<ModelParams>& velocity() const { return velocity_; }
  void set_velocity(std::optional<ModelParams> v) { velocity_ = std::move(v); }

 private:
  double lr_;
  double momentum_;
  std::optional<ModelParams> velocity_;
};

}  // namespace red
