#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "red/config.hpp"
#include "red/errors.hpp"
#include "red/image_io.hpp"
#include "red/mnist.hpp"
#include "red/rng.hpp"
#include "red/stained_mnist.hpp"

namespace red {

inline constexpr const char* kLabelsFile = "labels.csv";

inline std::string image_filename(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%06zu.png", i);
  return buf;
}

/// PNG per image plus labels.csv (filename,label,seed,digit_index).
inline void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledImage>& images) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / kLabelsFile);
  if (!csv) throw IngestionError("cannot write " + (dir / kLabelsFile).string());
  csv << "filename,label,seed,digit_index\n";
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string name = image_filename(i);
    write_png(dir / name, images[i].image);
    csv << name << ',' << images[i].label << ',' << images[i].seed << ',' << images[i].digit_index << '\n';
  }
}

namespace detail {

inline std::vector<LabeledImage> load_csv_dataset(const std::filesystem::path& dir) {
  const auto csv_path = dir / kLabelsFile;
  std::ifstream csv(csv_path);
  if (!csv) throw IngestionError("cannot open " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  if (line.rfind("filename,label", 0) != 0) throw IngestionError(csv_path.string() + ": missing header");
  std::vector<LabeledImage> out;
  std::size_t row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    const std::string where = csv_path.string() + " row " + std::to_string(row);
    if (cols.size() < 2) throw IngestionError(where + ": expected filename,label");
    LabeledImage li;
    if (cols[1] == "0") li.label = 0;
    else if (cols[1] == "1") li.label = 1;
    else throw IngestionError(where + ": label must be 0 or 1");
    try {
      if (cols.size() > 2) li.seed = std::stoull(cols[2]);
      if (cols.size() > 3) li.digit_index = std::stoull(cols[3]);
    } catch (const std::exception&) {
      throw IngestionError(where + ": bad seed or digit_index");
    }
    const auto file = dir / cols[0];
    if (!std::filesystem::exists(file)) throw IngestionError(where + ": missing image " + file.string());
    try {
      li.image = read_image(file);
    } catch (const IngestionError& e) {
      throw IngestionError(where + ": " + e.what());
    }
    out.push_back(std::move(li));
  }
  return out;
}

inline std::vector<LabeledImage> load_idx_dataset(const std::filesystem::path& images,
                                                  const std::filesystem::path& labels) {
  const auto imgs = read_idx_images(images);
  const auto labs = read_idx_labels(labels);
  if (imgs.size() != labs.size()) {
    throw IngestionError(labels.string() + ": " + std::to_string(labs.size()) + " labels for " +
                         std::to_string(imgs.size()) + " images");
  }
  std::vector<LabeledImage> out(imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    if (labs[i] != 0 && labs[i] != 1) {
      throw IngestionError(labels.string() + ": label " + std::to_string(labs[i]) + " at index " +
                           std::to_string(i) + " is not 0 or 1");
    }
    out[i].image = imgs[i];
    out[i].label = labs[i];
    out[i].digit_index = i;
  }
  return out;
}

}  // namespace detail

/// A directory holding labels.csv + images, a directory holding one
/// *idx3-ubyte / *idx1-ubyte pair, or the images IDX file itself.
inline std::vector<LabeledImage> load_dataset(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw IngestionError("dataset path does not exist: " + path.string());
  if (fs::is_directory(path)) {
    if (fs::exists(path / kLabelsFile)) return detail::load_csv_dataset(path);
    std::vector<fs::path> images, labels;
    for (const auto& e : fs::directory_iterator(path)) {
      const std::string n = e.path().filename().string();
      if (n.find("idx3") != std::string::npos) images.push_back(e.path());
      if (n.find("idx1") != std::string::npos) labels.push_back(e.path());
    }
    if (images.size() != 1 || labels.size() != 1) {
      throw IngestionError(path.string() + ": expected labels.csv or exactly one IDX image/label pair");
    }
    return detail::load_idx_dataset(images[0], labels[0]);
  }
  std::string labels = path.string();
  const auto pos = labels.rfind("idx3");
  if (pos == std::string::npos) throw IngestionError(path.string() + ": not a dataset directory or IDX file");
  labels.replace(pos, 4, "idx1");
  const auto img_pos = labels.rfind("images");
  if (img_pos != std::string::npos) labels.replace(img_pos, 6, "labels");
  return detail::load_idx_dataset(path, labels);
}

/// Deterministic permutation of 0..n-1.
inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = derive_stream(seed, 0x5u);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// ---- toy task ----------------------------------------------------------------

/// One toy image: uniform background noise plus a spot at a random position,
/// solid when positive, checkerboard decoy when negative.
template <class RngT>
Tensor make_toy_image(const ToyConfig& cfg, int label, RngT& rng) {
  const std::size_t n = cfg.image_size, s = cfg.spot_size;
  Tensor img({n, n});
  std::uniform_real_distribution<double> bg(0.0, cfg.background_max);
  for (double& v : img.values()) v = bg(rng);
  std::uniform_int_distribution<std::size_t> pos(0, n - s);
  const std::size_t r0 = pos(rng), c0 = pos(rng);
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < s; ++c) {
      img.at(r0 + r, c0 + c) = label == 1 ? cfg.spot_value : ((r + c) % 2 == 0 ? cfg.decoy_high : cfg.decoy_low);
    }
  }
  return img;
}

/// Balanced toy set: even indices positive. `split` keeps train and test
/// streams apart.
inline std::vector<LabeledImage> make_toy_dataset(const ToyConfig& cfg, std::size_t n, std::uint64_t seed,
                                                  std::uint64_t split) {
  std::vector<LabeledImage> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = derive_stream(seed, 0x70f0000 + split, i);
    out[i].label = i % 2 == 0 ? 1 : 0;
    out[i].image = make_toy_image(cfg, out[i].label, rng);
    out[i].seed = seed;
    out[i].digit_index = i;
  }
  return out;
}

/// Training and test sets described by a run configuration.
inline std::vector<LabeledImage> training_set(const RunConfig& cfg) {
  if (cfg.task == TaskKind::toy) return make_toy_dataset(cfg.toy, cfg.toy.train_images, cfg.seed, 0);
  if (cfg.train_data.empty()) throw ConfigError("train_data is not set");
  return load_dataset(cfg.train_data);
}

inline std::vector<LabeledImage> test_set(const RunConfig& cfg) {
  if (cfg.task == TaskKind::toy) return make_toy_dataset(cfg.toy, cfg.toy.test_images, cfg.seed, 1);
  if (cfg.test_data.empty()) throw ConfigError("test_data is not set");
  return load_dataset(cfg.test_data);
}

}  // namespace red
