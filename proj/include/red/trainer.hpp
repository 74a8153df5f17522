#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "red/checkpoint.hpp"
#include "red/config.hpp"
#include "red/dataset.hpp"
#include "red/errors.hpp"
#include "red/policy.hpp"
#include "red/rng.hpp"

namespace red {

/// Rollout worker count from RED_THREADS (default 1, serial).
inline unsigned rollout_threads() {
  const char* env = std::getenv("RED_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) throw ConfigError("RED_THREADS must be a positive integer");
  return static_cast<unsigned>(n);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline constexpr const char* kMetricsHeader = "episode,mean_regret,accuracy,mean_yhat_pos,mean_yhat_neg,eps_per_sec";

/// Ŷ ≥ 0.5 predicts existence.
inline int decide(double prediction) { return prediction >= 0.5 ? 1 : 0; }

struct MetricsRow {
  long episode = 0;
  double mean_regret = 0.0;
  double accuracy = 0.0;
  double mean_yhat_pos = 0.0;
  double mean_yhat_neg = 0.0;
  double eps_per_sec = 0.0;

  std::string csv() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g,%.6g", episode, mean_regret, accuracy, mean_yhat_pos,
                  mean_yhat_neg, eps_per_sec);
    return buf;
  }
};

class MetricsAccumulator {
 public:
  void add(double prediction, int label) {
    regret_ += regret(prediction, label);
    correct_ += decide(prediction) == label;
    ++n_;
    (label == 1 ? pos_ : neg_) += prediction;
    (label == 1 ? npos_ : nneg_) += 1;
  }
  MetricsRow row(long episode, double eps_per_sec) const {
    MetricsRow r;
    r.episode = episode;
    r.mean_regret = n_ ? regret_ / static_cast<double>(n_) : 0.0;
    r.accuracy = n_ ? static_cast<double>(correct_) / static_cast<double>(n_) : 0.0;
    r.mean_yhat_pos = npos_ ? pos_ / static_cast<double>(npos_) : 0.0;
    r.mean_yhat_neg = nneg_ ? neg_ / static_cast<double>(nneg_) : 0.0;
    r.eps_per_sec = eps_per_sec;
    return r;
  }
  std::size_t count() const { return n_; }

 private:
  double regret_ = 0.0, pos_ = 0.0, neg_ = 0.0;
  std::size_t correct_ = 0, n_ = 0, npos_ = 0, nneg_ = 0;
};

// ---- training ------------------------------------------------------------------

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  const Checkpoint* resume = nullptr;
  unsigned threads = 0;  // 0: RED_THREADS
  /// Called after every episode's rollouts, before the update.
  std::function<void(long, std::span<const Trajectory>)> on_episode;
  std::function<void(const MetricsRow&)> on_metrics;
  /// Pre-built training scenes (skips dataset loading).
  const std::vector<std::pair<Scene, int>>* scenes = nullptr;
};

inline std::vector<std::pair<Scene, int>> make_scenes(const std::vector<LabeledImage>& data, const EpisodeConfig& cfg) {
  std::vector<std::pair<Scene, int>> out;
  out.reserve(data.size());
  for (const auto& li : data) out.emplace_back(Scene::make(li.image, cfg), li.label);
  return out;
}

inline ModelParams initial_params(const RunConfig& cfg) {
  Rng rng = derive_stream(cfg.seed, 0x1417);
  return ModelParams::random(cfg.episode, rng);
}

/// Image index for a 0-based episode: a fresh seeded permutation per pass.
inline std::size_t episode_image(std::uint64_t seed, long episode, std::size_t n) {
  const auto pass = static_cast<std::uint64_t>(episode) / n;
  const auto order = shuffled_order(n, mix64(seed ^ (pass * 0x9e3779b97f4a7c15ULL)));
  return order[static_cast<std::size_t>(episode) % n];
}

/// m rollouts, baseline, two-term gradient, update; per episode. Writes
/// metrics.csv and checkpoints under out_dir when set.
inline Checkpoint train(const RunConfig& cfg, const TrainOptions& opt = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  const EpisodeConfig& ec = cfg.episode;
  std::vector<std::pair<Scene, int>> owned;
  if (!opt.scenes) owned = make_scenes(training_set(cfg), ec);
  const auto& scenes = opt.scenes ? *opt.scenes : owned;
  if (scenes.empty()) throw ConfigError("training set is empty");

  Checkpoint ck;
  ck.config = cfg;
  ck.rng_seed = cfg.seed;
  Optimizer optimizer(ec.learning_rate, ec.momentum);
  if (opt.resume) {
    opt.resume->params.check_against(ec);
    if (!opt.resume->params.all_finite()) throw InvalidArgument("resume checkpoint holds non-finite parameters");
    ck.params = opt.resume->params;
    ck.episode = opt.resume->episode;
    optimizer.set_velocity(opt.resume->velocity);
  } else {
    ck.params = initial_params(cfg);
  }
  const unsigned threads = opt.threads ? opt.threads : rollout_threads();

  std::ofstream metrics;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    const auto path = opt.out_dir / "metrics.csv";
    const bool fresh = !opt.resume || !fs::exists(path);
    metrics.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!metrics) throw IngestionError("cannot write " + path.string());
    if (fresh) metrics << kMetricsHeader << '\n';
  }
  auto save = [&](const Checkpoint& c, const std::string& name) {
    if (!opt.out_dir.empty()) save_checkpoint(opt.out_dir / name, c);
  };

  const std::size_t m = static_cast<std::size_t>(ec.baseline_samples);
  const long first = static_cast<long>(ck.episode);
  const long last = static_cast<long>(cfg.episodes);
  MetricsAccumulator acc;
  auto interval_start = std::chrono::steady_clock::now();
  long interval_episodes = 0;

  for (long e = first; e < last; ++e) {
    const auto& [scene, label] = scenes[episode_image(cfg.seed, e, scenes.size())];
    std::vector<Trajectory> trs(m);
    parallel_for(m, threads, [&](std::size_t i) {
      Rng rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(e) + 1, i);
      trs[i] = rollout(scene, label, ck.params, ec, rng);
    });
    if (opt.on_episode) opt.on_episode(e, trs);
    double baseline = 0.0;
    for (const auto& tr : trs) {
      baseline += tr.regret;
      acc.add(tr.prediction, tr.label);
    }
    baseline /= static_cast<double>(m);

    std::vector<ParamGrads> grads(m);
    parallel_for(m, threads, [&](std::size_t i) {
      grads[i] = policy_gradient(std::span<Trajectory>(&trs[i], 1), baseline, ck.params).total;
    });
    ParamGrads g = zeros_like(ck.params);
    for (const auto& gi : grads) axpy(g, gi, 1.0 / static_cast<double>(m));

    Checkpoint before = ck;
    const auto velocity_before = optimizer.velocity();
    optimizer.step(ck.params, g);
    ck.episode = static_cast<std::uint64_t>(e) + 1;
    if (!ck.params.all_finite() || !g.all_finite()) {
      before.velocity = velocity_before;
      save(before, "last_good.ckpt");
      throw Error("non-finite parameters after episode " + std::to_string(e + 1) +
                  " (mean regret " + std::to_string(baseline) + "); last good checkpoint is episode " +
                  std::to_string(before.episode));
    }
    ck.velocity = optimizer.velocity();
    ++interval_episodes;

    const long done = e + 1;
    if (done % cfg.metrics_interval == 0 || done == last) {
      double eps = 0.0;
      if (cfg.log_timing) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - interval_start).count();
        eps = secs > 0 ? static_cast<double>(interval_episodes) / secs : 0.0;
      }
      const MetricsRow row = acc.row(done, eps);
      if (metrics.is_open()) metrics << row.csv() << '\n' << std::flush;
      if (opt.on_metrics) opt.on_metrics(row);
      acc = {};
      interval_episodes = 0;
      interval_start = std::chrono::steady_clock::now();
    }
    if (done % cfg.checkpoint_interval == 0) {
      save(ck, "ckpt_" + std::to_string(done) + ".ckpt");
      save(ck, "last.ckpt");
    }
  }
  save(ck, "last.ckpt");
  return ck;
}

// ---- evaluation -----------------------------------------------------------------

struct EvalResult {
  std::size_t images = 0;
  double accuracy = 0.0;
  double mean_regret = 0.0;
  double mean_yhat_pos = 0.0;
  double mean_yhat_neg = 0.0;
  double seconds_per_image = 0.0;
  std::vector<double> predictions;
};

/// β = 0 rollouts (random actions when cfg.random_actions), Ŷ ≥ 0.5 rule.
inline EvalResult evaluate(const ModelParams& params, const EpisodeConfig& cfg,
                           const std::vector<LabeledImage>& data, std::uint64_t seed = 0) {
  params.check_against(cfg);
  if (data.empty()) throw ConfigError("evaluation set is empty");
  EvalResult res;
  MetricsAccumulator acc;
  RolloutOptions ro;
  ro.deterministic = true;
  ro.record_gradients = false;
  ro.keep_history = false;
  double seconds = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Scene scene = Scene::make(data[i].image, cfg);
    Rng rng = derive_stream(seed, 0xe7a1, i);
    const auto t0 = std::chrono::steady_clock::now();
    const Trajectory tr = rollout(scene, data[i].label, params, cfg, rng, ro);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    acc.add(tr.prediction, data[i].label);
    res.predictions.push_back(tr.prediction);
  }
  const MetricsRow row = acc.row(0, 0.0);
  res.images = data.size();
  res.accuracy = row.accuracy;
  res.mean_regret = row.mean_regret;
  res.mean_yhat_pos = row.mean_yhat_pos;
  res.mean_yhat_neg = row.mean_yhat_neg;
  res.seconds_per_image = seconds / static_cast<double>(data.size());
  return res;
}

// ---- heatmap --------------------------------------------------------------------

struct Heatmap {
  Tensor counts;      // H×W visits per attended crop center
  Tensor normalized;  // counts / max
  std::vector<PixelIndex> centers;
};

/// One long stochastic rollout without aggregation; histogram of crop centers.
inline Heatmap attention_heatmap(const ModelParams& params, const EpisodeConfig& cfg, const Tensor& image, int steps,
                                 std::uint64_t seed) {
  if (steps < 1) throw InvalidArgument("heatmap: steps must be at least 1");
  const Scene scene = Scene::make(image, cfg);
  Rng rng = derive_stream(seed, 0x4ea7);
  RolloutOptions ro;
  ro.steps = steps;
  ro.aggregate = false;
  ro.record_gradients = false;
  ro.keep_history = false;
  Trajectory tr = rollout(scene, 0, params, cfg, rng, ro);
  Heatmap hm;
  hm.counts = Tensor(image.shape());
  for (const PixelIndex& p : tr.centers) {
    hm.counts.at(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col)) += 1.0;
  }
  hm.normalized = hm.counts;
  const double peak = hm.counts.max();
  for (double& v : hm.normalized.values()) v /= peak;
  hm.centers = std::move(tr.centers);
  return hm;
}

}  // namespace red
