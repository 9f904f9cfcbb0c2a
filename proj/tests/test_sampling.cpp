#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "wsseg/sampling.hpp"

using namespace wsseg;

namespace {

DenseMask random_mask(std::mt19937_64& rng, int h, int w, double ship_p) {
  DenseMask m(h, w);
  std::bernoulli_distribution b(ship_p);
  for (auto& v : m.classes.data()) v = b(rng) ? 1 : 0;
  return m;
}

// Pixels visited walking from a to b one step at a time along the major axis.
std::set<std::pair<int, int>> line_walk_oracle(Pixel a, Pixel b) {
  std::set<std::pair<int, int>> out;
  const int n = std::max(std::abs(b.row - a.row), std::abs(b.col - a.col));
  for (int i = 0; i <= n; ++i) {
    const double t = n == 0 ? 0.0 : static_cast<double>(i) / n;
    out.emplace(static_cast<int>(std::lround(a.row + t * (b.row - a.row))),
                static_cast<int>(std::lround(a.col + t * (b.col - a.col))));
  }
  return out;
}

// Quotas by exact rational largest remainder (ties to the larger class).
std::array<std::size_t, 2> quota_oracle(std::size_t n, std::size_t bg, std::size_t ship) {
  const double total = static_cast<double>(bg + ship);
  std::array<double, 2> exact{n * bg / total, n * ship / total};
  std::array<std::size_t, 2> q{static_cast<std::size_t>(std::floor(exact[0])),
                               static_cast<std::size_t>(std::floor(exact[1]))};
  if (q[0] + q[1] < n) {
    const double f0 = exact[0] - q[0], f1 = exact[1] - q[1];
    if (f1 > f0 || (f1 == f0 && ship >= bg)) ++q[1];
    else ++q[0];
  }
  return q;
}

SquiggleSet two_blocks(int ship_px, int bg_px) {
  // Horizontal radius-0 strokes on separate rows of a wide canvas.
  SquiggleSet s;
  s.strokes.push_back({kShip, {{0, 0}, {0, ship_px - 1}}, 0});
  s.strokes.push_back({kBackground, {{2, 0}, {2, bg_px - 1}}, 0});
  return s;
}

}  // namespace

TEST(MaskDense, NinetyPercentOfTenByTenKeepsTen) {
  std::mt19937_64 rng(1);
  const auto m = random_mask(rng, 10, 10, 0.3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto [label, mask] = mask_dense_labels(m, 0.90, seed);
    EXPECT_EQ(label.points.size(), 10u);
    EXPECT_EQ(mask.popcount(), 10u);
    for (const auto& p : label.points) EXPECT_EQ(p.cls, m(p.row, p.col));
  }
}

TEST(MaskDense, ZeroFractionKeepsEverything) {
  std::mt19937_64 rng(2);
  const auto m = random_mask(rng, 6, 9, 0.5);
  const auto [label, mask] = mask_dense_labels(m, 0.0, 3);
  EXPECT_EQ(label.points.size(), 54u);
  EXPECT_EQ(mask.popcount(), 54u);
}

TEST(MaskDense, RetainedCountFormulaFuzz) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 30), w = 1 + static_cast<int>(rng() % 30);
    const double f = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
    const auto m = random_mask(rng, h, w, 0.4);
    const auto expected = std::llround((1.0 - f) * h * w);
    if (expected == 0) {
      EXPECT_THROW(mask_dense_labels(m, f, trial), DegenerateError);
      continue;
    }
    const auto [label, mask] = mask_dense_labels(m, f, trial);
    EXPECT_EQ(static_cast<long long>(label.points.size()), expected);
    EXPECT_EQ(mask.popcount(), label.points.size());
  }
}

TEST(MaskDense, RetainedShipFractionIsUnbiased) {
  DenseMask m(20, 20);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 20; ++c) m(r, c) = kShip;
  double sum = 0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) {
    const auto label = mask_dense_labels(m, 0.95, s).first;
    sum += static_cast<double>(label.count(kShip)) / label.points.size();
  }
  EXPECT_NEAR(sum / seeds, 0.5, 0.02);
}

TEST(MaskDense, FractionOutOfRange) {
  DenseMask m(4, 4);
  EXPECT_THROW(mask_dense_labels(m, 1.0, 0), ValueError);
  EXPECT_THROW(mask_dense_labels(m, -0.1, 0), ValueError);
}

TEST(PointsPerClass, FivePerClass) {
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = random_mask(rng, 16, 16, 0.3);
    const auto l = sample_points_per_class(m, 5, seed);
    ASSERT_EQ(l.points.size(), 10u);
    EXPECT_EQ(l.count(kShip), 5u);
    EXPECT_EQ(l.count(kBackground), 5u);
    std::set<std::pair<int, int>> seen;
    for (const auto& p : l.points) {
      EXPECT_EQ(p.cls, m(p.row, p.col));
      EXPECT_TRUE(seen.emplace(p.row, p.col).second);
    }
    EXPECT_EQ(sample_points_per_class(m, 5, seed), l);
  }
}

TEST(PointsPerClass, SingleShipPixelIsForced) {
  DenseMask m(8, 8);
  m(3, 6) = kShip;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto l = sample_points_per_class(m, 1, seed);
    ASSERT_EQ(l.count(kShip), 1u);
    for (const auto& p : l.points)
      if (p.cls == kShip) EXPECT_EQ(std::make_pair(p.row, p.col), std::make_pair(3, 6));
  }
}

TEST(PointsPerClass, AllBackgroundNamesShip) {
  DenseMask m(8, 8);
  try {
    sample_points_per_class(m, 5, 0);
    FAIL();
  } catch (const InsufficientClassError& e) {
    EXPECT_EQ(e.class_id(), kShip);
  }
}

TEST(PointsPerClass, DistinctSeedsDiffer) {
  std::mt19937_64 rng(5);
  const auto m = random_mask(rng, 32, 32, 0.5);
  EXPECT_NE(sample_points_per_class(m, 5, 1), sample_points_per_class(m, 5, 2));
}

TEST(Rasterize, SingleVertexRadiusZero) {
  SquiggleSet s;
  s.strokes.push_back({kShip, {{2, 3}}, 0});
  const auto r = rasterize_squiggles(s, 5, 5);
  EXPECT_EQ(r.pixels[kShip], (std::vector<Pixel>{{2, 3}}));
  EXPECT_TRUE(r.pixels[kBackground].empty());
}

TEST(Rasterize, HorizontalSegment) {
  SquiggleSet s;
  s.strokes.push_back({kShip, {{0, 0}, {0, 4}}, 0});
  const auto r = rasterize_squiggles(s, 6, 6);
  EXPECT_EQ(r.pixels[kShip], (std::vector<Pixel>{{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}}));
}

TEST(Rasterize, CornerDiscIsClipped) {
  SquiggleSet s;
  s.strokes.push_back({kBackground, {{0, 0}, {0, 0}}, 1});
  const auto r = rasterize_squiggles(s, 4, 4);
  std::vector<Pixel> expected;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc)
      if (dr >= 0 && dc >= 0) expected.push_back({dr, dc});
  EXPECT_EQ(r.pixels[kBackground], expected);
}

TEST(Rasterize, SegmentsMatchLineWalkAndAreEightConnected) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const Pixel a{static_cast<int>(rng() % 20), static_cast<int>(rng() % 20)};
    const Pixel b{static_cast<int>(rng() % 20), static_cast<int>(rng() % 20)};
    const auto px = line_pixels(a, b);
    const int n = std::max(std::abs(b.row - a.row), std::abs(b.col - a.col));
    ASSERT_EQ(static_cast<int>(px.size()), n + 1);
    EXPECT_EQ(px.front(), a);
    EXPECT_EQ(px.back(), b);
    for (std::size_t i = 1; i < px.size(); ++i) {
      EXPECT_LE(std::abs(px[i].row - px[i - 1].row), 1);
      EXPECT_LE(std::abs(px[i].col - px[i - 1].col), 1);
    }
    // Axis-aligned and diagonal segments have a unique digital line.
    if (a.row == b.row || a.col == b.col ||
        std::abs(b.row - a.row) == std::abs(b.col - a.col)) {
      std::set<std::pair<int, int>> got;
      for (const auto& p : px) got.emplace(p.row, p.col);
      EXPECT_EQ(got, line_walk_oracle(a, b));
    }
  }
}

TEST(Rasterize, DilationMatchesChebyshevEnumeration) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 6 + static_cast<int>(rng() % 10), w = 6 + static_cast<int>(rng() % 10);
    const int radius = static_cast<int>(rng() % 3);
    Stroke st{kShip, {}, radius};
    for (int v = 0; v < 3; ++v)
      st.polyline.push_back({static_cast<int>(rng() % h), static_cast<int>(rng() % w)});
    SquiggleSet s;
    s.strokes.push_back(st);
    std::vector<Pixel> centre;
    for (int v = 0; v + 1 < 3; ++v) {
      auto seg = line_pixels(st.polyline[v], st.polyline[v + 1]);
      centre.insert(centre.end(), seg.begin(), seg.end());
    }
    std::vector<Pixel> expected;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (const auto& p : centre)
          if (std::max(std::abs(p.row - r), std::abs(p.col - c)) <= radius) {
            expected.push_back({r, c});
            break;
          }
    EXPECT_EQ(rasterize_squiggles(s, h, w).pixels[kShip], expected);
  }
}

TEST(Rasterize, LaterStrokeWinsConflicts) {
  SquiggleSet s;
  s.strokes.push_back({kShip, {{1, 0}, {1, 4}}, 0});
  s.strokes.push_back({kBackground, {{0, 2}, {2, 2}}, 0});
  const auto r = rasterize_squiggles(s, 3, 5);
  EXPECT_EQ(r.pixels[kShip].size(), 4u);
  EXPECT_EQ(r.pixels[kBackground].size(), 3u);
}

TEST(SquiggleSample, QuotasFollowPixelShares) {
  EXPECT_EQ(squiggle_quotas(32, {100, 300}), (std::array<std::size_t, 2>{8, 24}));
  const auto l = sample_from_squiggles(two_blocks(300, 100), 32, 3, 300, 9);
  EXPECT_EQ(l.count(kShip), 24u);
  EXPECT_EQ(l.count(kBackground), 8u);
}

TEST(SquiggleSample, QuotasMatchLargestRemainderOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t bg = 1 + rng() % 400, ship = 1 + rng() % 400, n = 2 + rng() % 60;
    if (bg + ship < n) continue;
    auto expect = quota_oracle(n, bg, ship);
    for (int c = 0; c < 2; ++c)
      if (expect[c] == 0) {
        ++expect[c];
        --expect[1 - c];
      }
    const auto got = squiggle_quotas(n, {bg, ship});
    EXPECT_EQ(got[0] + got[1], n);
    EXPECT_GE(got[0], 1u);
    EXPECT_GE(got[1], 1u);
    if (got[0] <= bg && got[1] <= ship) {
      EXPECT_EQ(got, expect) << n << " " << bg << " " << ship;
    }
  }
}

TEST(SquiggleSample, OnePixelEachWithTwoPoints) {
  SquiggleSet s;
  s.strokes.push_back({kShip, {{0, 0}}, 0});
  s.strokes.push_back({kBackground, {{3, 3}}, 0});
  const auto l = sample_from_squiggles(s, 2, 4, 4, 0);
  ASSERT_EQ(l.points.size(), 2u);
  EXPECT_EQ(l.count(kShip), 1u);
}

TEST(SquiggleSample, ShipOnlyNamesBackground) {
  SquiggleSet s;
  s.strokes.push_back({kShip, {{0, 0}, {0, 3}}, 0});
  try {
    sample_from_squiggles(s, 32, 4, 4, 0);
    FAIL();
  } catch (const MissingClassError& e) {
    EXPECT_EQ(e.class_id(), kBackground);
  }
}

TEST(SquiggleSample, ExcessQuotaMovesToTheOtherClass) {
  SquiggleSet s;
  s.strokes.push_back({kShip, {{0, 0}, {0, 1}}, 0});           // 2 px
  s.strokes.push_back({kBackground, {{2, 0}, {2, 99}}, 0});    // 100 px
  const auto l = sample_from_squiggles(s, 32, 3, 100, 1);
  EXPECT_EQ(l.points.size(), 32u);
  EXPECT_EQ(l.count(kShip), 1u);
}

TEST(SquiggleSample, PointsCarryRasterClassesAndAreDistinct) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    SquiggleSet s;
    for (int k = 0; k < 4; ++k) {
      Stroke st{k % 2, {}, static_cast<int>(rng() % 3)};
      for (int v = 0; v < 1 + static_cast<int>(rng() % 4); ++v)
        st.polyline.push_back({static_cast<int>(rng() % 24), static_cast<int>(rng() % 24)});
      s.strokes.push_back(st);
    }
    const auto raster = rasterize_squiggles(s, 24, 24);
    if (raster.count(0) == 0 || raster.count(1) == 0) continue;
    const auto l = sample_from_squiggles(s, 32, 24, 24, trial);
    std::set<std::pair<int, int>> seen;
    for (const auto& p : l.points) {
      const auto& pool = raster.pixels[p.cls];
      EXPECT_TRUE(std::binary_search(pool.begin(), pool.end(), Pixel{p.row, p.col}));
      EXPECT_TRUE(seen.emplace(p.row, p.col).second);
    }
    if (raster.count(0) + raster.count(1) >= 32) EXPECT_EQ(l.points.size(), 32u);
    EXPECT_EQ(sample_from_squiggles(s, 32, 24, 24, trial), l);
  }
}
