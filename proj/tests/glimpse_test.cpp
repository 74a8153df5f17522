#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "red/gradcheck.hpp"
#include "red/glimpse.hpp"
#include "test_util.hpp"

namespace red {
namespace {

TEST(ToPixel, Corners) {
  const PixelPos bl = to_pixel({-1, -1}, 100, 100);
  EXPECT_DOUBLE_EQ(bl.row, 99.0);
  EXPECT_DOUBLE_EQ(bl.col, 0.0);
  const PixelPos tr = to_pixel({1, 1}, 100, 100);
  EXPECT_DOUBLE_EQ(tr.row, 0.0);
  EXPECT_DOUBLE_EQ(tr.col, 99.0);
  const PixelPos mid = to_pixel({0, 0}, 101, 101);
  EXPECT_DOUBLE_EQ(mid.row, 50.0);
  EXPECT_DOUBLE_EQ(mid.col, 50.0);
}

TEST(ToPixel, ClampsOutOfRangeActions) {
  const PixelPos p = to_pixel({3.0, -7.0}, 10, 20);
  EXPECT_DOUBLE_EQ(p.row, 9.0);
  EXPECT_DOUBLE_EQ(p.col, 19.0);
}

TEST(ExtractGlimpse, ZeroImageGivesZeros) {
  const Tensor g = extract_glimpse(Tensor({40, 40}), {0.3, -0.2}, GlimpseConfig{{4, 8, 12}});
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(ExtractGlimpse, PaperShape) {
  const Tensor g = extract_glimpse(Tensor({200, 200}, 0.5), {0, 0}, GlimpseConfig{{18, 36, 54}});
  EXPECT_EQ(g.shape(), (Shape{18, 18, 3}));
}

TEST(ExtractGlimpse, CoarseChannelMatchesPoolingOracle) {
  Tensor img({8, 8});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i) / 64.0;
  const Tensor g = extract_glimpse(img, {0, 0}, GlimpseConfig{{2, 4}});
  // Central 4×4 window spans rows/cols 2..5; each output is a 2×2 block mean.
  for (int u = 0; u < 2; ++u) {
    for (int v = 0; v < 2; ++v) {
      double want = 0.0;
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) want += img.at(2 + 2 * u + i, 2 + 2 * v + j);
      }
      EXPECT_DOUBLE_EQ(g.at(u, v, 1), want / 4.0);
    }
  }
  // Finest channel is the raw central 2×2 crop (rows/cols 3..4).
  EXPECT_DOUBLE_EQ(g.at(0, 0, 0), img.at(3, 3));
  EXPECT_DOUBLE_EQ(g.at(1, 1, 0), img.at(4, 4));
}

TEST(ExtractGlimpse, FinestChannelIsRawCropInTheInterior) {
  std::mt19937_64 rng(8);
  const Tensor img = test::random_tensor({50, 60}, rng, 0.0, 1.0);
  const GlimpseConfig cfg{{6, 12, 24}};
  const Tensor g = extract_glimpse_at(img, {25, 31}, cfg);
  for (int u = 0; u < 6; ++u) {
    for (int v = 0; v < 6; ++v) EXPECT_EQ(g.at(u, v, 0), img.at(22 + u, 28 + v));
  }
}

TEST(ExtractGlimpse, OutOfBoundsReadsAsZeroAndValuesStayInRange) {
  std::mt19937_64 rng(9);
  const Tensor img = test::random_tensor({30, 30}, rng, 0.0, 1.0);
  const GlimpseConfig cfg{{4, 8, 16}};
  const Tensor corner = extract_glimpse(img, {-1, 1}, cfg);  // top-left pixel
  EXPECT_EQ(corner.at(0, 0, 0), 0.0);
  EXPECT_EQ(corner.at(2, 2, 0), img.at(0, 0));
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor g = extract_glimpse(img, {u(rng), u(rng)}, cfg);
    EXPECT_GE(g.min(), 0.0);
    EXPECT_LE(g.max(), 1.0);
  }
}

TEST(ExtractGlimpse, ReadCountIndependentOfImageSize) {
  const GlimpseConfig cfg{{18, 36, 54}};
  PixelCounter small, large;
  const Tensor a({64, 64}, 0.25);
  const Tensor b({4096, 4096}, 0.25);
  for (double x : {-1.0, -0.3, 0.0, 0.8}) {
    extract_glimpse(a, {x, -x}, cfg, &small);
    extract_glimpse(b, {x, -x}, cfg, &large);
  }
  EXPECT_EQ(small.reads, large.reads);
  EXPECT_EQ(small.reads, 4 * (18u * 18 + 36u * 36 + 54u * 54));
}

TEST(GlimpseConfig, NonMultipleSizesRoundUpAndWarn) {
  const GlimpseConfig cfg{{4, 10}};
  EXPECT_EQ(cfg.read_size(1), 12);
  EXPECT_EQ(cfg.warnings().size(), 1u);
  EXPECT_EQ(GlimpseConfig({4, 8}).warnings().size(), 0u);
  EXPECT_THROW(GlimpseConfig({8, 4}).validate(), ConfigError);
  EXPECT_THROW(GlimpseConfig({0, 4}).validate(), ConfigError);
}

TEST(EncodeWhere, CenterActionIsIdentity) {
  std::mt19937_64 rng(10);
  const Tensor raw = test::random_tensor({3, 3, 2}, rng, 0.0, 1.0);
  const Tensor w = test::random_tensor({18, 2}, rng);
  EXPECT_EQ(encode_where(raw, {0, 0}, w), raw);
  EXPECT_EQ(encode_where(raw, {0.4, -0.9}, Tensor({18, 2})), raw);
}

TEST(EncodeWhere, ScalarOffset) {
  const Tensor raw({1, 1, 1}, 0.2);
  const Tensor w({1, 2}, std::vector<double>{0.1, 0.2});
  EXPECT_NEAR(encode_where(raw, {1, 1}, w)[0] - 0.2, 0.29131, 1e-5);
  EXPECT_NEAR(encode_where(raw, {1, 1}, w)[0] - 0.2, std::tanh(0.3), 1e-15);
}

TEST(EncodeWhere, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const Tensor raw = test::random_tensor({2, 2, 2}, rng, 0.0, 1.0);
  const Tensor w = test::random_tensor({8, 2}, rng);
  const Tensor weights = test::random_tensor({8}, rng);
  const Tensor a({2}, std::vector<double>{0.3, -0.6});
  auto objective = [&](const Tensor& wv, const Tensor& av) {
    Tape t;
    const Var x = encode_where(t, t.constant(raw), t.constant(av), t.constant(wv));
    return t.value(t.matvec(t.constant(weights.reshaped({1, 8})), x))[0];
  };
  Tape t;
  const Var vw = t.leaf(w), va = t.leaf(a);
  const Var x = encode_where(t, t.constant(raw), va, vw);
  t.backward(t.matvec(t.constant(weights.reshaped({1, 8})), x));
  const auto rw = finite_diff_check(
      [&](std::span<const double> p) {
        return objective(Tensor(w.shape(), {p.begin(), p.end()}), a);
      },
      w.values(), t.grad(vw).values());
  const auto ra = finite_diff_check(
      [&](std::span<const double> p) {
        return objective(w, Tensor(a.shape(), {p.begin(), p.end()}));
      },
      a.values(), t.grad(va).values());
  EXPECT_LT(rw.max_rel_error, 1e-4);
  EXPECT_LT(ra.max_rel_error, 1e-4);
}

TEST(Overview, ConstantImage) {
  const Tensor o = low_res_overview(Tensor({37, 29}, 0.3), 5);
  for (double v : o.values()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Overview, MeanOfTwoByTwo) {
  const Tensor img({2, 2}, std::vector<double>{0, 1, 1, 1});
  EXPECT_DOUBLE_EQ(low_res_overview(img, 1)[0], 0.75);
}

TEST(Overview, SameSizeIsIdentity) {
  std::mt19937_64 rng(12);
  const Tensor img = test::random_tensor({6, 6}, rng, 0.0, 1.0);
  EXPECT_EQ(low_res_overview(img, 6), img);
}

TEST(Overview, TooSmallRejected) {
  EXPECT_THROW(low_res_overview(Tensor({4, 10}), 5), InvalidArgument);
}

TEST(Overview, ReplicatedAcrossChannels) {
  const Tensor thumb({2, 2}, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  const Tensor x0 = overview_observation(thumb, 3);
  EXPECT_EQ(x0.shape(), (Shape{2, 2, 3}));
  EXPECT_EQ(x0.at(1, 0, 2), 0.3);
}

}  // namespace
}  // namespace red
