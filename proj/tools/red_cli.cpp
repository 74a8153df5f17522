#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "red/red.hpp"

namespace fs = std::filesystem;
using namespace red;

namespace {

struct SynthArgs {
  std::string source;
  std::string config;
  std::string out;
  double scale = 1.0 / 16.0;
  std::size_t count = 200;
  std::uint64_t seed = 1;
  bool toy = false;
};

int run_synth(const SynthArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  std::vector<LabeledImage> images;
  if (a.toy) {
    images = make_toy_dataset(cfg.toy, a.count, a.seed, 0);
  } else {
    if (a.source.empty()) throw ConfigError("synth: --source is required unless --toy is given");
    cfg.stain.scale_factor = a.scale;
    const auto digits = read_idx_images(a.source);
    images = synthesize_dataset(digits, cfg.stain, a.count, a.seed, [](std::size_t i, const std::string& why) {
      std::cerr << "skipped digit " << i << ": " << why << '\n';
    });
  }
  write_dataset(a.out, images);
  std::size_t pos = 0;
  for (const auto& li : images) pos += static_cast<std::size_t>(li.label);
  std::cout << "wrote " << images.size() << " images (" << pos << " positive) to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::string resume;
  std::optional<long> episodes;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (a.episodes) cfg.episodes = *a.episodes;
  if (a.seed) cfg.seed = *a.seed;
  std::optional<Checkpoint> resume;
  TrainOptions opt;
  opt.out_dir = a.out;
  if (!a.resume.empty()) {
    resume = load_checkpoint(a.resume);
    opt.resume = &*resume;
  }
  opt.on_metrics = [](const MetricsRow& r) { std::cout << r.csv() << '\n' << std::flush; };
  fs::create_directories(a.out);
  save_config(fs::path(a.out) / "run.cfg", cfg);
  const Checkpoint ck = train(cfg, opt);
  std::cout << "trained " << ck.episode << " episodes; checkpoint " << (fs::path(a.out) / "last.ckpt").string()
            << '\n';
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  bool random_actions = false;
  std::uint64_t seed = 0;
};

fs::path checkpoint_file(const std::string& p) {
  fs::path path(p);
  if (fs::is_directory(path)) return path / "last.ckpt";
  if (!fs::exists(path) && fs::exists(path.string() + ".ckpt")) return path.string() + ".ckpt";
  return path;
}

int run_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(checkpoint_file(a.ckpt));
  EpisodeConfig ec = ck.config.episode;
  ec.random_actions = a.random_actions;
  const auto data = a.data.empty() ? test_set(ck.config) : load_dataset(a.data);
  const EvalResult r = evaluate(ck.params, ec, data, a.seed);
  std::printf("images=%zu accuracy=%.6f mean_regret=%.6f mean_yhat_pos=%.6f mean_yhat_neg=%.6f "
              "seconds_per_image=%.6g\n",
              r.images, r.accuracy, r.mean_regret, r.mean_yhat_pos, r.mean_yhat_neg, r.seconds_per_image);
  return 0;
}

struct HeatmapArgs {
  std::string ckpt;
  std::string image;
  std::string out;
  int steps = 10000;
  std::uint64_t seed = 0;
};

int run_heatmap(const HeatmapArgs& a) {
  const Checkpoint ck = load_checkpoint(checkpoint_file(a.ckpt));
  const Tensor image = read_image(a.image);
  const Heatmap hm = attention_heatmap(ck.params, ck.config.episode, image, a.steps, a.seed);
  write_image(a.out, hm.normalized);
  std::cout << "wrote " << a.out << " (" << a.steps << " steps, peak " << hm.counts.max() << " visits)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent existence determination: synthesize, train, evaluate, heatmap"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize a stained-digit (or toy) dataset");
  s->add_option("--source", synth.source, "MNIST IDX image file");
  s->add_option("--config", synth.config, "Config file for stain/toy parameters");
  s->add_option("--scale", synth.scale, "Spatial scale factor")->capture_default_str();
  s->add_option("--count", synth.count, "Number of images")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_flag("--toy", synth.toy, "Write the toy spot task instead");

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train from a config file");
  t->add_option("--config", train_args.config, "Run config")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train_args.out, "Checkpoint and metrics directory")->required();
  t->add_option("--resume", train_args.resume, "Checkpoint to resume from");
  t->add_option("--episodes", train_args.episodes, "Override the episode count");
  t->add_option("--seed", train_args.seed, "Override the seed");

  EvalArgs eval_args;
  auto* e = app.add_subcommand("eval", "Deterministic evaluation");
  e->add_option("--ckpt", eval_args.ckpt, "Checkpoint file or directory")->required();
  e->add_option("--data", eval_args.data, "Dataset (default: the config's test set)");
  e->add_flag("--random-actions", eval_args.random_actions, "Random-attention ablation");
  e->add_option("--seed", eval_args.seed, "Seed for random actions")->capture_default_str();

  HeatmapArgs hm;
  auto* h = app.add_subcommand("heatmap", "Attention density of one long rollout");
  h->add_option("--ckpt", hm.ckpt, "Checkpoint file or directory")->required();
  h->add_option("--image", hm.image, "Input image (PNG or PGM)")->required();
  h->add_option("--out", hm.out, "Output image")->required();
  h->add_option("--steps", hm.steps, "Rollout length")->capture_default_str()->check(CLI::PositiveNumber);
  h->add_option("--seed", hm.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(train_args);
    if (*e) return run_eval(eval_args);
    if (*h) return run_heatmap(hm);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
