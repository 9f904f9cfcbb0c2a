#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "wsseg/nn/params_io.hpp"
#include "wsseg/train/split.hpp"
#include "wsseg/train/synthetic.hpp"
#include "wsseg/train/trainer.hpp"

using namespace wsseg;
using namespace wsseg::train;

namespace {

SyntheticSpec small_spec(int count) {
  SyntheticSpec s;
  s.count = count;
  s.height = s.width = 32;
  s.semi_major_min = 4;
  s.semi_major_max = 7;
  s.semi_minor_min = 2;
  s.semi_minor_max = 3.5;
  s.ships_max = 2;
  return s;
}

std::vector<DatasetItem> small_dataset(int count, std::uint64_t seed,
                                       PolarityMix mix = PolarityMix{}) {
  auto spec = small_spec(count);
  spec.polarity = mix;
  std::vector<DatasetItem> out;
  for (auto& s : generate_synthetic(spec, seed)) out.push_back({std::move(s.image), std::move(s.mask)});
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 2;
  c.seed = 11;
  c.model.depth = 2;
  c.model.base_channels = 4;
  c.augment.rotation_degrees_max = 10;
  return c;
}

std::vector<int> iota_ids(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST(Split, Sizes) {
  auto [a, b] = split_dataset(iota_ids(1200), 0.9, 3);
  EXPECT_EQ(a.size(), 1080u);
  EXPECT_EQ(b.size(), 120u);
  auto [c, d] = split_dataset(iota_ids(10), 0.9, 3);
  EXPECT_EQ(c.size(), 9u);
  EXPECT_EQ(d.size(), 1u);
}

TEST(Split, DeterministicPartition) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 300);
    const double ratio = 0.5 + 0.45 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto seed = rng();
    const auto ids = iota_ids(n);
    std::pair<std::vector<int>, std::vector<int>> s;
    try {
      s = split_dataset(ids, ratio, seed);
    } catch (const TooFewItemsError&) {
      EXPECT_TRUE(std::floor(ratio * n) == 0 || std::floor(ratio * n + 1e-9) == n);
      continue;
    }
    EXPECT_EQ(s, split_dataset(ids, ratio, seed));
    EXPECT_EQ(s.first.size(), static_cast<std::size_t>(std::floor(ratio * n + 1e-9)));
    std::vector<int> all = s.first;
    all.insert(all.end(), s.second.begin(), s.second.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, ids);
  }
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset(iota_ids(1), 0.9, 0), TooFewItemsError);
  EXPECT_THROW(split_dataset(iota_ids(5), 1.0, 0), ConfigError);
  EXPECT_THROW(split_dataset(iota_ids(2), 0.4, 0), TooFewItemsError);
}

TEST(Config, ParsesKeysAndRejectsUnknown) {
  const auto c = parse_train_config(
      "epochs = 7\nsupervision = masked_dense(0.9)\nmodel.depth = 3\naugment.crop_height = 64\n"
      "augment.crop_width = 48\n# comment\nmodel.upsample = transposed\n");
  EXPECT_EQ(c.epochs, 7);
  EXPECT_EQ(c.supervision, Supervision::masked_dense);
  EXPECT_DOUBLE_EQ(c.mask_fraction, 0.9);
  EXPECT_EQ(c.model.depth, 3);
  EXPECT_EQ(c.model.upsample, nn::Upsample::transposed);
  EXPECT_EQ(c.augment.crop_size, std::make_pair(64, 48));
  EXPECT_THROW(parse_train_config("epoch = 3\n"), ConfigError);
  EXPECT_THROW(parse_train_config("supervision = boxes\n"), ConfigError);
  EXPECT_THROW(parse_train_config("augment.crop_height = 64\n"), ConfigError);
  EXPECT_THROW(parse_train_config("epochs = 0\n"), ConfigError);
}

TEST(Labels, ReportStrings) {
  EXPECT_EQ(supervision_label(Supervision::dense), "Dense");
  EXPECT_EQ(supervision_label(Supervision::point_n10), "Point (n=10)");
  EXPECT_EQ(supervision_label(Supervision::squiggle_n32), "Squiggle (n=32)");
  EXPECT_EQ(supervision_label(Supervision::masked_dense, 0.9), "Masked dense (90%)");
  AugmentConfig a;
  a.geometric = false;
  a.invert_probability = 0;
  EXPECT_EQ(augmentation_label(a), "None");
  a.invert_probability = 0.5;
  EXPECT_EQ(augmentation_label(a), "Inversion");
  a.enable_grayscale = true;
  EXPECT_EQ(augmentation_label(a), "Grayscale and Inversion");
  a.geometric = true;
  EXPECT_EQ(augmentation_label(a), "Geometric, Grayscale and Inversion");
}

TEST(ItemsFromMasks, EverySchemeYieldsValidLabels) {
  const auto data = small_dataset(6, 2);
  for (auto sup : {Supervision::dense, Supervision::masked_dense, Supervision::point_n10,
                   Supervision::squiggle_n32}) {
    const auto items = items_from_masks(data, sup, 5);
    ASSERT_EQ(items.size(), data.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& m = *data[i].mask;
      for (const auto& p : items[i].label.points) EXPECT_EQ(p.cls, m(p.row, p.col));
      if (sup == Supervision::point_n10) EXPECT_EQ(items[i].label.points.size(), 10u);
      if (sup == Supervision::squiggle_n32) EXPECT_EQ(items[i].label.points.size(), 32u);
      EXPECT_EQ(items[i].dense.has_value(), sup == Supervision::dense);
    }
    EXPECT_EQ(items_from_masks(data, sup, 5)[3].label.points, items[3].label.points);
  }
}

TEST(Training, LossDecreasesOnSmallFixture) {
  auto cfg = small_config();
  cfg.epochs = 6;
  const auto items = items_from_masks(small_dataset(10, 3), Supervision::dense, 1);
  const auto r = wsseg::train::train(cfg, items);
  ASSERT_EQ(r.log.epochs.size(), 6u);
  EXPECT_LT(r.log.epochs.back().train_loss, r.log.epochs.front().train_loss);
  EXPECT_LT(r.log.epochs[static_cast<std::size_t>(r.log.best_epoch - 1)].val_loss,
            r.log.initial_val_loss);
}

TEST(Training, DenseSupervisionReducesToPerPixelCrossEntropy) {
  auto cfg = small_config();
  cfg.epochs = 2;
  const auto items = items_from_masks(small_dataset(8, 4), Supervision::dense, 1);
  int batches = 0;
  TrainOptions opt;
  opt.on_batch = [&](const BatchView& b) {
    double sum = 0;
    for (std::size_t i = 0; i < b.ids.size(); ++i) {
      ASSERT_TRUE(b.dense[i].has_value());
      const auto& m = *b.dense[i];
      const auto& p = b.predictions[i];
      ASSERT_EQ(m.height(), p.height());
      double ce = 0;
      for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c)
          ce -= std::log(std::max<double>(p.probs(r, c, m(r, c)), kProbabilityFloor));
      sum += ce / static_cast<double>(m.height() * m.width());
    }
    EXPECT_NEAR(b.loss, sum / static_cast<double>(b.ids.size()), 1e-6);
    ++batches;
  };
  wsseg::train::train(cfg, items, opt);
  EXPECT_GT(batches, 0);
}

TEST(Training, BitwiseReproducibleAndBestEpochIsMinimum) {
  auto cfg = small_config();
  cfg.augment.crop_size = std::make_pair(24, 24);
  const auto items = items_from_masks(small_dataset(8, 5), Supervision::squiggle_n32, 2);
  const auto a = wsseg::train::train(cfg, items);
  const auto b = wsseg::train::train(cfg, items);
  EXPECT_EQ(training_log_to_json(a.log).dump(), training_log_to_json(b.log).dump());
  EXPECT_EQ(a.params.values, b.params.values);
  const auto best = std::min_element(a.log.epochs.begin(), a.log.epochs.end(),
                                     [](const auto& x, const auto& y) { return x.val_loss < y.val_loss; });
  EXPECT_EQ(a.log.best_epoch, best->epoch);
  cfg.seed = 12;
  EXPECT_NE(wsseg::train::train(cfg, items).params.values, a.params.values);
}

TEST(Training, EmptyEpochIsAnError) {
  auto cfg = small_config();
  const auto data = small_dataset(4, 6);
  std::vector<TrainItem> items;
  for (const auto& d : data) items.push_back({d.image, {}, std::nullopt});
  EXPECT_THROW(wsseg::train::train(cfg, items, items), EmptyEpochError);
}

TEST(Training, SkippedItemsAreLogged) {
  auto cfg = small_config();
  cfg.epochs = 1;
  auto items = items_from_masks(small_dataset(4, 6), Supervision::point_n10, 1);
  items[1].label.points.clear();
  const auto r = wsseg::train::train(cfg, items, items);
  EXPECT_EQ(r.log.epochs[0].skipped, 1u);
  ASSERT_EQ(r.log.warnings.size(), 1u);
  EXPECT_NE(r.log.warnings[0].find(items[1].image.id), std::string::npos);
}

TEST(Transfer, MismatchedModelsAreRejected) {
  auto pre = small_config(), fine = small_config();
  fine.model.base_channels = 8;
  EXPECT_THROW(pretrain_then_finetune(pre, fine, {}, {}), ConfigMismatchError);
}

TEST(Transfer, CheckpointShapeMismatchIsConfigMismatch) {
  auto cfg = small_config();
  const auto path = std::filesystem::temp_directory_path() / "wsseg_train_ckpt.bin";
  nn::save_params(nn::build_model<float>(nn::ModelConfig{3, 4, 1, 2, nn::Upsample::bilinear}, 0), path);
  cfg.pretrain_checkpoint = path;
  const auto items = items_from_masks(small_dataset(4, 7), Supervision::point_n10, 1);
  EXPECT_THROW(wsseg::train::train(cfg, items), ConfigMismatchError);
}

TEST(Transfer, OmittingCheckpointEqualsPlainTraining) {
  auto cfg = small_config();
  cfg.epochs = 2;
  const auto items = items_from_masks(small_dataset(6, 8), Supervision::point_n10, 1);
  const auto plain = wsseg::train::train(cfg, items);
  TrainOptions opt;
  opt.init = nn::build_model<float>(cfg.model, cfg.seed);
  EXPECT_EQ(wsseg::train::train(cfg, items, opt).params.values, plain.params.values);
}

TEST(Transfer, VisiblePretrainingFeedsSingleChannelModel) {
  auto pre = small_config(), fine = small_config();
  pre.epochs = fine.epochs = 2;
  const auto visible = small_dataset(6, 9, PolarityMix{0, 0, 1});
  ASSERT_EQ(visible[0].image.channels(), 3);
  const auto ir = small_dataset(6, 10);
  const auto sparse = items_from_masks(ir, Supervision::squiggle_n32, 3);
  const auto r = pretrain_then_finetune(pre, fine, visible, sparse);
  EXPECT_EQ(r.params.config.in_channels, 1);
  EXPECT_EQ(r.pretrain_log.epochs.size(), 2u);
  EXPECT_EQ(r.finetune_log.epochs.size(), 2u);
  const auto report = evaluate(r.params, ir);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_GE(report.rows[0].jaccard, 0.0);
  EXPECT_LE(report.rows[0].jaccard, 1.0);
}

TEST(Evaluate, PerfectAndAllBackgroundPredictors) {
  const auto data = small_dataset(5, 12);
  std::vector<Prediction> perfect, empty;
  std::vector<DenseMask> truths;
  for (const auto& d : data) {
    Prediction p(d.mask->height(), d.mask->width()), e(d.mask->height(), d.mask->width());
    for (int r = 0; r < p.height(); ++r)
      for (int c = 0; c < p.width(); ++c) {
        const bool ship = (*d.mask)(r, c) == kShip;
        p.probs(r, c, kShip) = ship;
        p.probs(r, c, kBackground) = !ship;
        e.probs(r, c, kBackground) = 1;
      }
    perfect.push_back(p);
    empty.push_back(e);
    truths.push_back(*d.mask);
  }
  const auto good = evaluate_set(perfect, truths, 0.5).rows[0];
  EXPECT_EQ(good.precision, 1.0);
  EXPECT_EQ(good.recall, 1.0);
  EXPECT_EQ(good.jaccard, 1.0);
  const auto bad = evaluate_set(empty, truths, 0.5).rows[0];
  EXPECT_EQ(bad.recall, 0.0);
  EXPECT_EQ(bad.jaccard, 0.0);
}

TEST(Evaluate, RequiresMasks) {
  auto data = small_dataset(2, 13);
  const auto params = nn::build_model<float>(small_config().model, 0);
  EXPECT_THROW(evaluate(params, {}), TooFewItemsError);
  data[1].mask.reset();
  EXPECT_THROW(evaluate(params, data), ValueError);
}
