#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <functional>
#include <type_traits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "red/errors.hpp"
#include "red/params.hpp"
#include "red/stained_mnist.hpp"

namespace red {

/// Where training images come from.
enum class TaskKind { dataset, toy };

/// Toy existence task: one 8×8 spot on a noisy background. Positives carry a
/// solid spot, negatives a checkerboard spot of the same mean, so the
/// low-resolution overview cannot tell them apart.
struct ToyConfig {
  std::size_t image_size = 112;
  std::size_t spot_size = 8;
  double background_max = 0.25;
  double spot_value = 0.6;
  double decoy_high = 1.0;
  double decoy_low = 0.2;
  std::size_t train_images = 2000;
  std::size_t test_images = 400;

  void validate() const {
    if (spot_size < 1 || spot_size > image_size) throw ConfigError("toy: spot_size must fit in image_size");
    if (train_images < 1 || test_images < 1) throw ConfigError("toy: image counts must be positive");
  }
  friend bool operator==(const ToyConfig&, const ToyConfig&) = default;
};

/// Every knob of a run.
struct RunConfig {
  EpisodeConfig episode;
  StainConfig stain;
  ToyConfig toy;
  TaskKind task = TaskKind::dataset;
  std::string train_data;
  std::string test_data;
  std::uint64_t seed = 1;
  long episodes = 10000;
  long checkpoint_interval = 1000;
  long metrics_interval = 100;
  bool log_timing = true;  // false writes eps_per_sec = 0 for byte-stable metrics

  void validate() const {
    episode.validate();
    stain.validate();
    toy.validate();
    if (episodes < 0) throw ConfigError("episodes must be non-negative");
    if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be positive");
    if (metrics_interval < 1) throw ConfigError("metrics_interval must be positive");
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !in.eof()) {
    in.clear();
    in >> std::ws;
    if (!in.eof()) throw ConfigError("config: bad value for " + key + ": '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline std::vector<std::pair<std::string, Field>> config_fields() {
  std::vector<std::pair<std::string, Field>> f;
  auto real = [&](const char* key, auto member) {
    f.push_back({key, Field{[member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); },
                            [member, key = std::string(key)](RunConfig& c, const std::string& v) {
                              member(c) = parse_number<double>(key, v);
                            }}});
  };
  auto integer = [&](const char* key, auto member) {
    f.push_back({key, Field{[member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
                            [member, key = std::string(key)](RunConfig& c, const std::string& v) {
                              using T = std::remove_reference_t<decltype(member(c))>;
                              const long long n = parse_number<long long>(key, v);
                              if (std::is_unsigned_v<T> && n < 0) throw ConfigError("config: " + key + " must be non-negative");
                              member(c) = static_cast<T>(n);
                            }}});
  };
  auto boolean = [&](const char* key, auto member) {
    f.push_back({key, Field{[member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false"); },
                            [member, key = std::string(key)](RunConfig& c, const std::string& v) {
                              member(c) = parse_bool(key, v);
                            }}});
  };
  auto text = [&](const char* key, auto member) {
    f.push_back({key, Field{[member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); },
                            [member](RunConfig& c, const std::string& v) { member(c) = v; }}});
  };

  f.push_back({"task", Field{[](const RunConfig& c) { return std::string(c.task == TaskKind::toy ? "toy" : "dataset"); },
                             [](RunConfig& c, const std::string& v) {
                               if (v == "toy") c.task = TaskKind::toy;
                               else if (v == "dataset") c.task = TaskKind::dataset;
                               else throw ConfigError("config: task must be 'dataset' or 'toy'");
                             }}});
  text("train_data", [](RunConfig& c) -> std::string& { return c.train_data; });
  text("test_data", [](RunConfig& c) -> std::string& { return c.test_data; });
  integer("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
  integer("episodes", [](RunConfig& c) -> long& { return c.episodes; });
  integer("checkpoint_interval", [](RunConfig& c) -> long& { return c.checkpoint_interval; });
  integer("metrics_interval", [](RunConfig& c) -> long& { return c.metrics_interval; });
  boolean("log_timing", [](RunConfig& c) -> bool& { return c.log_timing; });

  f.push_back({"glimpse_sizes", Field{[](const RunConfig& c) {
                                        std::string s;
                                        for (int n : c.episode.glimpse.sizes) s += (s.empty() ? "" : ",") + std::to_string(n);
                                        return s;
                                      },
                                      [](RunConfig& c, const std::string& v) {
                                        std::vector<int> sizes;
                                        std::stringstream ss(v);
                                        std::string item;
                                        while (std::getline(ss, item, ',')) sizes.push_back(parse_number<int>("glimpse_sizes", trim(item)));
                                        if (sizes.empty()) throw ConfigError("config: glimpse_sizes is empty");
                                        c.episode.glimpse.sizes = sizes;
                                      }}});
  integer("state_channels", [](RunConfig& c) -> std::size_t& { return c.episode.state_channels; });
  integer("kernel_size", [](RunConfig& c) -> std::size_t& { return c.episode.kernel_size; });
  integer("k", [](RunConfig& c) -> int& { return c.episode.aggregation.k; });
  real("gamma", [](RunConfig& c) -> double& { return c.episode.aggregation.gamma; });
  integer("t0", [](RunConfig& c) -> int& { return c.episode.aggregation.t0; });
  integer("horizon", [](RunConfig& c) -> int& { return c.episode.aggregation.horizon; });
  real("beta", [](RunConfig& c) -> double& { return c.episode.beta; });
  real("learning_rate", [](RunConfig& c) -> double& { return c.episode.learning_rate; });
  real("momentum", [](RunConfig& c) -> double& { return c.episode.momentum; });
  integer("baseline_samples", [](RunConfig& c) -> int& { return c.episode.baseline_samples; });
  f.push_back({"chaining", Field{[](const RunConfig& c) { return std::string(to_string(c.episode.chaining)); },
                                 [](RunConfig& c, const std::string& v) {
                                   if (v == "full") c.episode.chaining = ScoreChaining::full;
                                   else if (v == "immediate") c.episode.chaining = ScoreChaining::immediate;
                                   else throw ConfigError("config: chaining must be 'full' or 'immediate'");
                                 }}});
  boolean("random_actions", [](RunConfig& c) -> bool& { return c.episode.random_actions; });

  integer("stain_target_size", [](RunConfig& c) -> std::size_t& { return c.stain.target_size; });
  integer("stain_smooth_kernel", [](RunConfig& c) -> std::size_t& { return c.stain.smooth_kernel; });
  real("stain_grad_threshold", [](RunConfig& c) -> double& { return c.stain.grad_threshold; });
  real("stain_erosion_radius", [](RunConfig& c) -> double& { return c.stain.erosion_radius; });
  integer("stain_count_min", [](RunConfig& c) -> int& { return c.stain.stain_count_min; });
  integer("stain_count_max", [](RunConfig& c) -> int& { return c.stain.stain_count_max; });
  real("stain_radius", [](RunConfig& c) -> double& { return c.stain.stain_radius; });
  real("stain_probability", [](RunConfig& c) -> double& { return c.stain.stain_probability; });
  real("stain_scale", [](RunConfig& c) -> double& { return c.stain.scale_factor; });
  boolean("stain_gradient_in_source_pixels", [](RunConfig& c) -> bool& { return c.stain.gradient_in_source_pixels; });

  integer("toy_image_size", [](RunConfig& c) -> std::size_t& { return c.toy.image_size; });
  integer("toy_spot_size", [](RunConfig& c) -> std::size_t& { return c.toy.spot_size; });
  real("toy_background_max", [](RunConfig& c) -> double& { return c.toy.background_max; });
  real("toy_spot_value", [](RunConfig& c) -> double& { return c.toy.spot_value; });
  real("toy_decoy_high", [](RunConfig& c) -> double& { return c.toy.decoy_high; });
  real("toy_decoy_low", [](RunConfig& c) -> double& { return c.toy.decoy_low; });
  integer("toy_train_images", [](RunConfig& c) -> std::size_t& { return c.toy.train_images; });
  integer("toy_test_images", [](RunConfig& c) -> std::size_t& { return c.toy.test_images; });
  return f;
}

}  // namespace detail

/// Flat `key = value` lines, every key in a fixed order.
inline std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& [key, field] : detail::config_fields()) out += key + " = " + field.get(c) + "\n";
  return out;
}

/// Parses `key = value` lines over the defaults; '#' starts a comment.
/// Unknown keys are errors.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  const auto fields = detail::config_fields();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
    if (it == fields.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second.set(base, value);
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline void save_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write config " + path.string());
  out << to_text(c);
}

}  // namespace red
