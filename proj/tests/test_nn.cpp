#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wsseg/eval_mask.hpp"
#include "wsseg/loss.hpp"
#include "wsseg/nn/unet.hpp"

using namespace wsseg;
using namespace wsseg::nn;

namespace {

// Parameter count from the architecture description: two 3x3 convolutions
// per stage, a bottleneck, decoder stages fed by [skip, upsampled], and a
// 1x1 head.
std::size_t param_count_oracle(const ModelConfig& c) {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k * k + out; };
  auto ch = [&](int s) { return static_cast<std::size_t>(c.base_channels) << s; };
  std::size_t n = 0;
  std::size_t in = c.in_channels;
  for (int s = 0; s < c.depth; ++s) {
    n += conv(in, ch(s), 3) + conv(ch(s), ch(s), 3);
    in = ch(s);
  }
  n += conv(ch(c.depth - 1), ch(c.depth), 3) + conv(ch(c.depth), ch(c.depth), 3);
  for (int s = c.depth - 1; s >= 0; --s) {
    std::size_t up = ch(s + 1);
    if (c.upsample == Upsample::transposed) {
      n += conv(ch(s + 1), ch(s), 2);
      up = ch(s);
    }
    n += conv(ch(s) + up, ch(s), 3) + conv(ch(s), ch(s), 3);
  }
  return n + conv(ch(0), 2, 1);
}

ImageSample random_image(std::mt19937_64& rng, int h, int w) {
  ImageSample img{"x", Raster<float>(h, w, 1), Polarity::white_hot, Source::synthetic};
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : img.pixels.data()) v = u(rng);
  return img;
}

double max_sum_error(const Prediction& p) {
  double worst = 0;
  for (int r = 0; r < p.height(); ++r)
    for (int c = 0; c < p.width(); ++c)
      worst = std::max(worst, std::abs(p.probs(r, c, 0) + p.probs(r, c, 1) - 1.0));
  return worst;
}

}  // namespace

TEST(Model, DepthOneBaseFourParameterCount) {
  ModelConfig c;
  c.depth = 1;
  c.base_channels = 4;
  EXPECT_EQ(build_model<float>(c, 0).parameter_count(), 1662u);
  EXPECT_EQ(param_count_oracle(c), 1662u);
}

TEST(Model, ParameterCountMatchesOracle) {
  for (int depth = 1; depth <= 5; ++depth)
    for (int base : {4, 8, 32})
      for (auto up : {Upsample::bilinear, Upsample::transposed}) {
        ModelConfig c;
        c.depth = depth;
        c.base_channels = base;
        c.upsample = up;
        EXPECT_EQ(build_model<float>(c, 1).parameter_count(), param_count_oracle(c));
      }
}

TEST(Model, BuildIsDeterministic) {
  ModelConfig c;
  c.depth = 2;
  c.base_channels = 8;
  const auto a = build_model<float>(c, 9), b = build_model<float>(c, 9);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, build_model<float>(c, 10).values);
}

TEST(Model, InvalidConfigs) {
  ModelConfig c;
  c.out_classes = 3;
  EXPECT_THROW(build_model<float>(c, 0), ConfigError);
  c = {};
  c.depth = 0;
  EXPECT_THROW(build_model<float>(c, 0), ConfigError);
  c = {};
  c.base_channels = 2;
  EXPECT_THROW(build_model<float>(c, 0), ConfigError);
}

TEST(Forward, DefaultModelShapeContract) {
  std::mt19937_64 rng(1);
  const ModelConfig c;  // depth 4, base 32
  const auto params = build_model<float>(c, 0);
  const auto p = forward(params, random_image(rng, 64, 64));
  EXPECT_EQ(p.height(), 64);
  EXPECT_EQ(p.width(), 64);
  EXPECT_EQ(p.probs.channels(), 2);
  EXPECT_LT(max_sum_error(p), 1e-6);
}

TEST(Forward, PadAndCropArithmetic) {
  const ModelConfig c{4, 4, 1, 2, Upsample::bilinear};
  UNet<float> net(c);
  EXPECT_EQ(net.padded_extent(60, 60), std::make_pair(64, 64));
  for (int h = 16; h <= 200; ++h) {
    const int expect = (h + 15) / 16 * 16;
    EXPECT_EQ(net.padded_extent(h, 16).first, expect);
  }
  EXPECT_THROW(net.padded_extent(5, 16), ShapeError);
}

TEST(Forward, PaddedInputEqualsReflectedOracle) {
  std::mt19937_64 rng(2);
  const ModelConfig c{4, 4, 1, 2, Upsample::bilinear};
  const auto params = build_model<float>(c, 3);
  const auto img = random_image(rng, 60, 60);
  // Reflect without repeating the edge: index 60 -> 58, 61 -> 57, ...
  Raster<float> padded(64, 64, 1);
  for (int r = 0; r < 64; ++r)
    for (int col = 0; col < 64; ++col)
      padded(r, col) = img.pixels(r < 60 ? r : 118 - r, col < 60 ? col : 118 - col);
  UNet<float> net(c);
  const auto big = net.forward(params, padded);
  const auto small = forward(params, img);
  ASSERT_EQ(small.height(), 60);
  ASSERT_EQ(small.width(), 60);
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < 60; ++r)
      for (int col = 0; col < 60; ++col)
        ASSERT_EQ(static_cast<float>(small.probs(r, col, ch)), big.probs(r, col, ch));
}

TEST(Forward, ShapeContractFuzz) {
  std::mt19937_64 rng(3);
  const ModelConfig c{4, 4, 1, 2, Upsample::bilinear};
  const auto params = build_model<float>(c, 0);
  std::vector<std::pair<int, int>> sizes = {{16, 16}, {17, 511}, {512, 16}, {512, 512}};
  for (int i = 0; i < 12; ++i)
    sizes.push_back({16 + static_cast<int>(rng() % 497), 16 + static_cast<int>(rng() % 497)});
  for (const auto& [h, w] : sizes) {
    const auto p = forward(params, random_image(rng, h, w));
    EXPECT_EQ(p.height(), h);
    EXPECT_EQ(p.width(), w);
    EXPECT_LT(max_sum_error(p), 1e-6);
  }
}

TEST(Forward, DeterministicAndChannelChecked) {
  std::mt19937_64 rng(4);
  const ModelConfig c{2, 4, 1, 2, Upsample::transposed};
  const auto params = build_model<float>(c, 0);
  const auto img = random_image(rng, 20, 24);
  EXPECT_EQ(forward(params, img).probs, forward(params, img).probs);
  ImageSample rgb{"x", Raster<float>(20, 24, 3), Polarity::visible, Source::airbus_like};
  EXPECT_THROW(forward(params, rgb), ShapeError);
}

class GradientCheck : public ::testing::TestWithParam<Upsample> {};

TEST_P(GradientCheck, LossThroughNetworkMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const ModelConfig c{2, 4, 1, 2, GetParam()};
  const auto params = build_model<double>(c, 7);
  UNet<double> net(c);
  Raster<double> input(16, 16, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : input.data()) v = u(rng);
  SparseLabel label;
  for (int i = 0; i < 24; ++i) label.points.push_back({(i * 7) % 16, (i * 5 + i / 16) % 16, i % 2});
  const auto mask = build_eval_mask(label, 16, 16);

  auto loss_of = [&](const ModelParams<double>& p) {
    return pwce_loss(net.forward(p, input), label, mask);
  };
  ForwardCache<double> cache;
  const auto pred = net.forward(params, input, &cache);
  Raster<double> dprobs;
  pwce_loss_with_grad(pred, label, mask, dprobs);
  auto grads = params.zeros_like();
  net.backward(params, cache, dprobs, grads);

  int checked = 0;
  auto probe = params;
  for (std::size_t k = 0; k < params.values.size(); ++k)
    for (int draw = 0; draw < 4; ++draw) {
      const std::size_t i = rng() % params.values[k].size();
      const double h = 1e-6, keep = probe.values[k][i];
      probe.values[k][i] = keep + h;
      const double up = loss_of(probe);
      probe.values[k][i] = keep - h;
      const double down = loss_of(probe);
      probe.values[k][i] = keep;
      const double fd = (up - down) / (2 * h), an = grads.values[k][i];
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
      EXPECT_LT(std::abs(fd - an) / scale, 1e-3) << params.table[k].name << "[" << i << "]";
      ++checked;
    }
  EXPECT_GT(checked, 40);
}

INSTANTIATE_TEST_SUITE_P(Upsampling, GradientCheck,
                         ::testing::Values(Upsample::bilinear, Upsample::transposed));

TEST(Forward, ResultsDoNotDependOnHeapLayout) {
  std::mt19937_64 rng(6);
  const ModelConfig c{4, 8, 1, 2, Upsample::transposed};
  const auto params = build_model<float>(c, 0);
  const auto img = random_image(rng, 16, 16);
  const auto first = forward(params, img).probs;
  for (std::size_t pad = 1; pad < 40; pad += 3) {
    std::vector<char> shift(pad * 4 + 1);
    const auto copy = params;
    EXPECT_EQ(forward(copy, img).probs, first) << pad;
  }
}
