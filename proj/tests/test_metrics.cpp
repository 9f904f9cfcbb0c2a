#include <gtest/gtest.h>

#include <random>
#include <set>

#include "wsseg/metrics.hpp"

using namespace wsseg;

namespace {

DenseMask from_bits(int h, int w, std::uint64_t bits) {
  DenseMask m(h, w);
  for (int i = 0; i < h * w; ++i) m(i / w, i % w) = (bits >> i) & 1u;
  return m;
}

std::set<int> ship_set(const DenseMask& m) {
  std::set<int> s;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m(r, c) == kShip) s.insert(r * m.width() + c);
  return s;
}

// |A ∩ B| / |A ∪ B| by explicit set construction.
double jaccard_oracle(const DenseMask& a, const DenseMask& b) {
  const auto sa = ship_set(a), sb = ship_set(b);
  std::set<int> inter, uni = sa;
  for (int x : sa)
    if (sb.count(x)) inter.insert(x);
  uni.insert(sb.begin(), sb.end());
  return uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

Prediction constant_prediction(int h, int w, double ship) {
  Prediction p(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      p.probs(r, c, 1) = ship;
      p.probs(r, c, 0) = 1 - ship;
    }
  return p;
}

Prediction from_mask(const DenseMask& m) {
  Prediction p(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      p.probs(r, c, 1) = m(r, c);
      p.probs(r, c, 0) = 1 - m(r, c);
    }
  return p;
}

}  // namespace

TEST(Threshold, TiesGoToShip) {
  EXPECT_EQ(threshold_prediction(constant_prediction(3, 3, 0.5)).count(kShip), 9u);
  EXPECT_EQ(threshold_prediction(constant_prediction(3, 3, 0.0)).count(kShip), 0u);
  EXPECT_THROW(threshold_prediction(constant_prediction(3, 3, 0.0), 1.0), ValueError);
}

TEST(Threshold, MatchesArgmaxAwayFromTies) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Prediction p(12, 12);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 12; ++c) {
      const double s = u(rng);
      p.probs(r, c, 1) = s;
      p.probs(r, c, 0) = 1 - s;
    }
  const auto m = threshold_prediction(p);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 12; ++c)
      if (p.probs(r, c, 1) != p.probs(r, c, 0))
        EXPECT_EQ(m(r, c), p.probs(r, c, 1) > p.probs(r, c, 0) ? kShip : kBackground);
}

TEST(Jaccard, Examples) {
  const auto a = from_bits(3, 3, 0b000000111);
  EXPECT_EQ(jaccard(a, a), 1.0);
  EXPECT_EQ(jaccard(a, from_bits(3, 3, 0b111000000)), 0.0);
  EXPECT_EQ(jaccard(a, from_bits(3, 3, 0b000001011)), 0.5);
  EXPECT_EQ(jaccard(DenseMask(3, 3), DenseMask(3, 3)), 1.0);
  EXPECT_THROW(jaccard(DenseMask(3, 3), DenseMask(3, 4)), ShapeError);
}

TEST(Jaccard, AgreesWithSetOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = from_bits(8, 8, rng()), b = from_bits(8, 8, rng() & rng());
    const double j = jaccard(a, b);
    EXPECT_NEAR(j, jaccard_oracle(a, b), 1e-12);
    EXPECT_EQ(j, jaccard(b, a));
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, 1.0);
  }
}

TEST(PrecisionRecall, Examples) {
  const auto half = from_bits(2, 2, 0b0011);
  const auto all = from_bits(2, 2, 0b1111);
  for (auto mode : {PrMode::ship_class, PrMode::micro_all_pixels})
    EXPECT_EQ(precision_recall(half, half, mode), std::make_pair(1.0, 1.0));
  EXPECT_EQ(precision_recall(all, half, PrMode::ship_class), std::make_pair(0.5, 1.0));
  EXPECT_EQ(precision_recall(all, half, PrMode::micro_all_pixels), std::make_pair(0.5, 0.5));
}

TEST(PrecisionRecall, CountOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = from_bits(6, 6, rng()), t = from_bits(6, 6, rng());
    int tp = 0, fp = 0, fn = 0, agree = 0;
    for (int i = 0; i < 36; ++i) {
      const int a = p(i / 6, i % 6), b = t(i / 6, i % 6);
      tp += a && b;
      fp += a && !b;
      fn += !a && b;
      agree += a == b;
    }
    const auto [prec, rec] = precision_recall(p, t, PrMode::ship_class);
    EXPECT_DOUBLE_EQ(prec, tp + fp ? static_cast<double>(tp) / (tp + fp) : 1.0);
    EXPECT_DOUBLE_EQ(rec, tp + fn ? static_cast<double>(tp) / (tp + fn) : 1.0);
    const auto [mp, mr] = precision_recall(p, t, PrMode::micro_all_pixels);
    EXPECT_DOUBLE_EQ(mp, agree / 36.0);
    EXPECT_DOUBLE_EQ(mr, agree / 36.0);
  }
}

TEST(EvaluateSet, PerfectSingleImage) {
  const auto t = from_bits(4, 4, 0b0000011001100000);
  const auto r = evaluate_set(std::vector<Prediction>{from_mask(t)}, {t}, 0.5, "Dense", "None");
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].precision, 1.0);
  EXPECT_EQ(r.rows[0].recall, 1.0);
  EXPECT_EQ(r.rows[0].jaccard, 1.0);
  EXPECT_EQ(r.per_image.size(), 1u);
}

TEST(EvaluateSet, PooledCounts) {
  // Image 1: perfect, union 4. Image 2: disjoint, union 4.
  const auto t1 = from_bits(4, 4, 0b1111);
  const auto t2 = from_bits(4, 4, 0b0011);
  const auto p2 = from_bits(4, 4, 0b1100);
  const auto r =
      evaluate_set(std::vector<Prediction>{from_mask(t1), from_mask(p2)}, {t1, t2}, 0.5);
  EXPECT_DOUBLE_EQ(r.rows[0].jaccard, 0.5);
  EXPECT_DOUBLE_EQ(r.per_image[0].jaccard, 1.0);
  EXPECT_DOUBLE_EQ(r.per_image[1].jaccard, 0.0);
}

TEST(EvaluateSet, PooledMatchesSummedOracle) {
  std::mt19937_64 rng(4);
  std::vector<Prediction> preds;
  std::vector<DenseMask> truths;
  std::uint64_t inter = 0, uni = 0;
  for (int i = 0; i < 10; ++i) {
    const auto p = from_bits(8, 8, rng()), t = from_bits(8, 8, rng());
    preds.push_back(from_mask(p));
    truths.push_back(t);
    const auto sa = ship_set(p), sb = ship_set(t);
    std::set<int> u = sa;
    u.insert(sb.begin(), sb.end());
    uni += u.size();
    for (int x : sa) inter += sb.count(x);
  }
  const auto r = evaluate_set(preds, truths, 0.5);
  EXPECT_NEAR(r.rows[0].jaccard, static_cast<double>(inter) / uni, 1e-12);
}

TEST(EvaluateSet, AllBackgroundPredictorHasZeroRecall) {
  const auto t = from_bits(4, 4, 0b0110);
  const auto r = evaluate_set(std::vector<Prediction>{constant_prediction(4, 4, 0.0)}, {t}, 0.5);
  EXPECT_EQ(r.rows[0].recall, 0.0);
}

TEST(EvaluateSet, LengthMismatch) {
  EXPECT_THROW(evaluate_set(std::vector<Prediction>{constant_prediction(2, 2, 0.1)}, {}, 0.5),
               LengthMismatchError);
}
