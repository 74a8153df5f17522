#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "digits.hpp"
#include "red/image_io.hpp"
#include "red/mnist.hpp"
#include "red/stained_mnist.hpp"

using namespace red;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("red_stain_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

StainConfig desk_config() {
  StainConfig c;
  c.scale_factor = 1.0 / 16.0;
  return c;
}

}  // namespace

TEST(Upscale, TwoByTwoRampIsMonotoneAndColumnsConstant) {
  Tensor src({2, 2}, {0, 1, 0, 1});
  const Tensor up = upscale_bilinear(src, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(up.at(r, c), up.at(0, c));
  }
  EXPECT_DOUBLE_EQ(up.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(up.at(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(up.at(0, 2), 0.75);
  EXPECT_DOUBLE_EQ(up.at(0, 3), 1.0);
}

TEST(Upscale, SameSizeIsIdentity) {
  const Tensor d = test::thick_digit(0);
  EXPECT_EQ(upscale_bilinear(d, 28), d);
}

TEST(Upscale, RejectsShrinking) {
  EXPECT_THROW(upscale_bilinear(test::thick_digit(0), 27), InvalidArgument);
}

TEST(Smooth, ImpulseGivesKernel) {
  Tensor img({11, 11});
  img.at(5, 5) = 1.0;
  const Tensor out = gaussian_smooth(img, 5);
  const auto taps = gaussian_taps(5);
  double total = 0.0;
  for (std::size_t r = 0; r < 11; ++r) {
    for (std::size_t c = 0; c < 11; ++c) {
      const long dr = static_cast<long>(r) - 5, dc = static_cast<long>(c) - 5;
      const double expect = std::abs(dr) <= 2 && std::abs(dc) <= 2
                                ? taps[static_cast<std::size_t>(dr + 2)] * taps[static_cast<std::size_t>(dc + 2)]
                                : 0.0;
      EXPECT_NEAR(out.at(r, c), expect, 1e-15);
      EXPECT_NEAR(out.at(r, c), out.at(10 - r, c), 1e-15);
      EXPECT_NEAR(out.at(r, c), out.at(c, r), 1e-15);
      total += out.at(r, c);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Smooth, TapsForPaperKernel) {
  const auto taps = gaussian_taps(20);
  double s = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    s += taps[i];
    EXPECT_DOUBLE_EQ(taps[i], taps[19 - i]);
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  // σ = 5: neighbour ratio at the center pair is exp(-(1.5² - 0.5²)/50).
  EXPECT_NEAR(taps[8] / taps[9], std::exp(-(2.25 - 0.25) / 50.0), 1e-12);
}

TEST(Smooth, InteriorOfConstantImageUnchangedAndRangeKept) {
  Tensor img({30, 30}, 0.7);
  const Tensor out = gaussian_smooth(img, 7);
  EXPECT_NEAR(out.at(15, 15), 0.7, 1e-12);
  EXPECT_LT(out.at(0, 0), 0.7);
  EXPECT_GE(out.min(), 0.0);
  EXPECT_LE(out.max(), 0.7 + 1e-12);
}

TEST(Smooth, KernelOneIsIdentity) {
  const Tensor d = test::thick_digit(2);
  EXPECT_EQ(gaussian_smooth(d, 1), d);
}

TEST(Gradient, StencilOracle) {
  Tensor img({5, 5});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) img.at(r, c) = 0.1 * static_cast<double>(r * r) + 0.03 * static_cast<double>(c);
  const Tensor g = central_gradient(img);
  // Interior (2,2): gx = 0.03, gy = (0.9 - 0.1)/2 = 0.4.
  EXPECT_NEAR(g.at(2, 2), std::hypot(0.03, 0.4), 1e-12);
  // Corner (0,0): one-sided gx = 0.03, gy = 0.1.
  EXPECT_NEAR(g.at(0, 0), std::hypot(0.03, 0.1), 1e-12);
  // Edge (4,4): gy = 1.6 - 0.9.
  EXPECT_NEAR(g.at(4, 4), std::hypot(0.03, 0.7), 1e-12);
}

TEST(Gradient, ConstantImageIsZero) {
  EXPECT_EQ(central_gradient(Tensor({6, 7}, 0.4)).max(), 0.0);
  EXPECT_THROW(central_gradient(Tensor({2, 5})), InvalidArgument);
}

TEST(Thinning, SinglePixelRadiusTwoZeroesThirteen) {
  Tensor img({9, 9}, 1.0), mask({9, 9});
  mask.at(4, 4) = 1.0;
  const Tensor out = zero_near(img, mask, 2.0);
  int zeros = 0;
  for (double v : out.values()) zeros += v == 0.0;
  EXPECT_EQ(zeros, 13);
  EXPECT_EQ(out.at(4, 6), 0.0);
  EXPECT_EQ(out.at(5, 6), 1.0);
}

TEST(Thinning, DistanceTransformMatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution on(0.05);
  Tensor mask({23, 17});
  for (double& v : mask.values()) v = on(rng) ? 1.0 : 0.0;
  mask.at(0, 0) = 1.0;
  const Tensor d2 = squared_distance_transform(mask);
  for (std::size_t r = 0; r < 23; ++r) {
    for (std::size_t c = 0; c < 17; ++c) {
      double best = 1e300;
      for (std::size_t r2 = 0; r2 < 23; ++r2)
        for (std::size_t c2 = 0; c2 < 17; ++c2)
          if (mask.at(r2, c2) != 0.0) {
            const double dr = double(r) - double(r2), dc = double(c) - double(c2);
            best = std::min(best, dr * dr + dc * dc);
          }
      EXPECT_DOUBLE_EQ(d2.at(r, c), best) << r << "," << c;
    }
  }
}

TEST(Thinning, EmptyMaskLeavesImage) {
  const Tensor img({8, 8}, 0.5);
  EXPECT_EQ(zero_near(img, Tensor({8, 8}), 3.0), img);
}

TEST(Thinning, ThickStrokeCoreSurvivesAtDeskScale) {
  const StainConfig s = desk_config().scaled();
  EXPECT_EQ(s.target_size, 448u);
  EXPECT_EQ(s.smooth_kernel, 1u);
  EXPECT_EQ(s.erosion_radius, 31.0);
  EXPECT_EQ(s.stain_radius, 1.0);
  const Tensor up = upscale_bilinear(test::thick_digit(1), s.target_size);
  const Tensor thin = thin_writings(up, s.grad_threshold, s.erosion_radius, 16.0);
  EXPECT_GT(thin.max(), 0.0);
  EXPECT_LT(thin.sum(), up.sum());
}

TEST(Stains, CountCentersAndDisks) {
  const StainConfig s = desk_config().scaled();
  Tensor img = thin_writings(upscale_bilinear(test::thick_digit(0), 448), s.grad_threshold, s.erosion_radius, 16.0);
  Rng rng(11);
  const StainResult r = add_stains(img, s, rng, 16.0);
  EXPECT_GE(r.count, 10);
  EXPECT_LE(r.count, 15);
  ASSERT_EQ(r.centers.size(), static_cast<std::size_t>(r.count));
  const Tensor g = central_gradient(img);
  for (const PixelIndex& p : r.centers) {
    EXPECT_GE(g.at(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col)) * 16.0, s.grad_threshold);
    EXPECT_EQ(r.image.at(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col)), 1.0);
  }
  for (std::size_t i = 0; i < r.centers.size(); ++i)
    for (std::size_t j = i + 1; j < r.centers.size(); ++j) EXPECT_FALSE(r.centers[i] == r.centers[j]);
}

TEST(Stains, DeterministicGivenSeed) {
  const StainConfig s = desk_config().scaled();
  const Tensor img = thin_writings(upscale_bilinear(test::thick_digit(2), 448), s.grad_threshold, s.erosion_radius, 16.0);
  Rng a(5), b(5);
  const StainResult ra = add_stains(img, s, a, 16.0), rb = add_stains(img, s, b, 16.0);
  EXPECT_EQ(ra.image, rb.image);
  EXPECT_EQ(ra.centers, rb.centers);
}

TEST(Stains, EmptyGradientSetFails) {
  const StainConfig s = desk_config().scaled();
  Rng rng(1);
  EXPECT_THROW(add_stains(Tensor({20, 20}), s, rng), SynthesisError);
}

TEST(Synthesis, DatasetIsDeterministicAndBalanced) {
  const auto digits = test::thick_digits(8);
  StainConfig c = desk_config();
  c.scale_factor = 1.0 / 64.0;  // 112 px keeps the test fast
  const auto a = synthesize_dataset(digits, c, 24, 99);
  const auto b = synthesize_dataset(digits, c, 24, 99);
  ASSERT_EQ(a.size(), 24u);
  int positives = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].image.dim(0), 112u);
    positives += a[i].label;
    if (a[i].label == 1) {
      EXPECT_GE(a[i].stain_count, 10);
    } else {
      EXPECT_EQ(a[i].stain_count, 0);
    }
  }
  EXPECT_GT(positives, 4);
  EXPECT_LT(positives, 20);
  const auto other = synthesize_dataset(digits, c, 24, 100);
  bool differs = false;
  for (std::size_t i = 0; i < other.size(); ++i) differs = differs || other[i].label != a[i].label;
  EXPECT_TRUE(differs);
}

TEST(Synthesis, VanishingDigitIsSkipped) {
  std::vector<Tensor> digits{Tensor({28, 28}), test::thick_digit(1)};
  StainConfig c = desk_config();
  c.scale_factor = 1.0 / 64.0;
  std::vector<std::size_t> skipped;
  const auto out = synthesize_dataset(digits, c, 2, 1, [&](std::size_t i, const std::string&) { skipped.push_back(i); });
  EXPECT_FALSE(skipped.empty());
  EXPECT_EQ(skipped.front(), 0u);
  for (const auto& li : out) EXPECT_EQ(li.digit_index, 1u);
}

TEST(Io, PngRoundTripIsExactOnBytes) {
  const auto dir = temp_dir("png");
  Tensor img({5, 7});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i * 7 % 256) / 255.0;
  write_png(dir / "a.png", img);
  const Tensor back = read_png(dir / "a.png");
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_DOUBLE_EQ(back[i], img[i]);
  write_pgm(dir / "a.pgm", img);
  EXPECT_EQ(read_image(dir / "a.pgm"), back);
}

TEST(Io, BadFilesAreIngestionErrors) {
  const auto dir = temp_dir("bad");
  std::ofstream(dir / "x.png") << "not a png";
  EXPECT_THROW(read_png(dir / "x.png"), IngestionError);
  EXPECT_THROW(read_image(dir / "missing.png"), IngestionError);
  std::ofstream(dir / "x.idx") << "abc";
  EXPECT_THROW(read_idx_images(dir / "x.idx"), IngestionError);
}

TEST(Io, IdxRoundTrip) {
  const auto dir = temp_dir("idx");
  const auto path = test::write_digit_idx(dir, 3);
  const auto imgs = read_idx_images(path);
  ASSERT_EQ(imgs.size(), 3u);
  EXPECT_EQ(imgs[1], test::thick_digit(1));
  write_idx_labels(dir / "labels", {1, 0, 7});
  EXPECT_EQ(read_idx_labels(dir / "labels"), (std::vector<int>{1, 0, 7}));
  EXPECT_THROW(read_idx_labels(path), IngestionError);
}
