#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsseg/annotation_json.hpp"
#include "wsseg/augment.hpp"
#include "wsseg/error.hpp"
#include "wsseg/eval_mask.hpp"
#include "wsseg/loss.hpp"
#include "wsseg/metrics.hpp"
#include "wsseg/nn/adam.hpp"
#include "wsseg/nn/params_io.hpp"
#include "wsseg/nn/unet.hpp"
#include "wsseg/sampling.hpp"
#include "wsseg/train/config.hpp"
#include "wsseg/train/dataset.hpp"
#include "wsseg/train/split.hpp"
#include "wsseg/train/synthetic.hpp"

namespace wsseg::train {

/// One supervised example. When `dense` is set every pixel of the (possibly
/// augmented) mask is a target and `label` is only used for validation.
struct TrainItem {
  ImageSample image;
  SparseLabel label;
  std::optional<DenseMask> dense;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  std::size_t skipped = 0;
};

struct BatchLog {
  int epoch = 0;
  std::vector<std::string> ids;
  double loss = 0;
};

struct TrainingLog {
  double initial_val_loss = 0;  // before the first update
  std::vector<EpochLog> epochs;
  std::vector<BatchLog> batches;
  std::vector<std::string> warnings;
  int best_epoch = 0;
};

/// What one optimisation step saw, for inspection by callers.
struct BatchView {
  int epoch = 0;
  const std::vector<std::string>& ids;
  const std::vector<ImageSample>& images;
  const std::vector<SparseLabel>& labels;
  const std::vector<std::optional<DenseMask>>& dense;
  const std::vector<BasicPrediction<float>>& predictions;
  double loss = 0;
};

struct TrainOptions {
  std::optional<nn::ModelParams<float>> init;  // overrides pretrain_checkpoint
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(const BatchView&)> on_batch;
};

struct TrainResult {
  nn::ModelParams<float> params;  // best validation epoch
  TrainingLog log;
};

namespace detail {

struct Prepared {
  ImageSample image;
  SparseLabel label;
  std::optional<DenseMask> dense;
};

inline ImageSample match_channels(const ImageSample& image, const AugmentConfig& aug,
                                  int in_channels) {
  if (image.channels() == 3 && in_channels == 1 && aug.enable_grayscale) return to_grayscale(image);
  return image;
}

/// Grayscale, random inversion, then the geometric map (with crop).
inline Prepared augment_item(const TrainItem& item, const AugmentConfig& aug, int in_channels,
                             std::uint64_t seed) {
  Prepared out{match_channels(item.image, aug, in_channels), item.label, item.dense};
  if (out.image.channels() == 1 && aug.invert_probability > 0.0)
    out.image = random_invert(out.image, aug.invert_probability, seed);
  if (!aug.geometric && !aug.crop_size) return out;
  if (!out.dense && out.label.points.empty()) return out;  // skipped by the caller
  AugmentConfig g = aug;
  if (!aug.geometric) {
    g.rotation_degrees_max = 0.0;
    g.scale_range = {1.0, 1.0};
    g.flip_probability = 0.0;
  }
  auto res = out.dense
                 ? geometric_transform(out.image, &*out.dense, nullptr, g, mix_seed(seed, 1))
                 : geometric_transform(out.image, nullptr, &out.label, g, mix_seed(seed, 1));
  out.image = std::move(res.image);
  if (out.dense) {
    out.dense = std::move(res.dense);
    out.label = dense_to_sparse(*out.dense);
  } else {
    out.label = std::move(*res.sparse);
  }
  return out;
}

inline Prepared plain_item(const TrainItem& item, const AugmentConfig& aug, int in_channels) {
  return {match_channels(item.image, aug, in_channels), item.label, std::nullopt};
}

template <typename T>
double item_loss(nn::UNet<T>& net, const nn::ModelParams<T>& params, const Prepared& p) {
  const auto mask = build_eval_mask(p.label, p.image.height(), p.image.width());
  const auto pred = net.forward(params, nn::to_network_input<T>(p.image));
  return static_cast<double>(pwce_loss(pred, p.label, mask));
}

}  // namespace detail

/// Mean masked loss over `items` (no augmentation); items without points
/// are ignored. NaN when nothing could be scored.
inline double validation_loss(const nn::ModelParams<float>& params,
                              const std::vector<TrainItem>& items, const AugmentConfig& aug) {
  nn::UNet<float> net(params.config);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& item : items) {
    if (item.label.points.empty()) continue;
    sum += detail::item_loss(net, params,
                             detail::plain_item(item, aug, params.config.in_channels));
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

inline nn::ModelParams<float> initial_params(const TrainConfig& cfg, const TrainOptions& opt) {
  if (opt.init) {
    if (!(opt.init->config == cfg.model))
      throw ConfigMismatchError("initial parameters do not match the model configuration");
    return *opt.init;
  }
  if (cfg.pretrain_checkpoint) {
    try {
      return nn::load_params<float>(*cfg.pretrain_checkpoint, cfg.model);
    } catch (const ShapeTableError& e) {
      throw ConfigMismatchError(std::string("pretrained checkpoint: ") + e.what());
    }
  }
  return nn::build_model<float>(cfg.model, cfg.seed);
}

/// Mini-batch Adam on the masked loss. Batch loss is the mean of the
/// per-item losses; the returned parameters are those of the epoch with the
/// lowest validation loss.
inline TrainResult train(const TrainConfig& cfg, const std::vector<TrainItem>& train_items,
                         const std::vector<TrainItem>& val_items, const TrainOptions& opt = {}) {
  validate(cfg);
  if (train_items.empty()) throw TooFewItemsError("no training items");
  TrainResult result{initial_params(cfg, opt), {}};
  auto& log = result.log;
  nn::ModelParams<float> params = result.params;
  nn::UNet<float> net(cfg.model);
  nn::Adam<float> adam(cfg.learning_rate);
  auto grads = params.zeros_like();
  const int in_ch = cfg.model.in_channels;

  log.initial_val_loss = validation_loss(params, val_items, cfg.augment);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_items.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5eed0000ull + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::uint64_t epoch_seed = mix_seed(cfg.seed ^ cfg.augment.seed, epoch);

    EpochLog ep;
    ep.epoch = epoch;
    double epoch_sum = 0;
    std::size_t epoch_items = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::string> ids;
      std::vector<ImageSample> images;
      std::vector<SparseLabel> labels;
      std::vector<std::optional<DenseMask>> dense;
      std::vector<EvaluationMask> masks;
      for (std::size_t k = start; k < end; ++k) {
        const auto& item = train_items[order[k]];
        auto p = detail::augment_item(item, cfg.augment, in_ch, mix_seed(epoch_seed, order[k]));
        if (p.label.points.empty()) {
          log.warnings.push_back("epoch " + std::to_string(epoch) + ": '" + item.image.id +
                                 "' has no annotated points after augmentation, skipped");
          ++ep.skipped;
          continue;
        }
        masks.push_back(build_eval_mask(p.label, p.image.height(), p.image.width()));
        ids.push_back(item.image.id);
        images.push_back(std::move(p.image));
        labels.push_back(std::move(p.label));
        dense.push_back(std::move(p.dense));
      }
      if (ids.empty()) continue;

      for (auto& g : grads.values) std::fill(g.begin(), g.end(), 0.0f);
      std::vector<BasicPrediction<float>> preds;
      double batch_sum = 0;
      const float inv_b = 1.0f / static_cast<float>(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        nn::ForwardCache<float> cache;
        auto pred = net.forward(params, nn::to_network_input<float>(images[i]), &cache);
        Raster<float> dprobs;
        batch_sum += pwce_loss_with_grad(pred, labels[i], masks[i], dprobs);
        for (auto& v : dprobs.data()) v *= inv_b;
        net.backward(params, cache, dprobs, grads);
        if (opt.on_batch) preds.push_back(std::move(pred));
      }
      const double batch_loss = batch_sum / static_cast<double>(ids.size());
      if (opt.on_batch)
        opt.on_batch(BatchView{epoch, ids, images, labels, dense, preds, batch_loss});
      adam.step(params, grads);
      log.batches.push_back({epoch, ids, batch_loss});
      epoch_sum += batch_sum;
      epoch_items += ids.size();
    }
    if (epoch_items == 0)
      throw EmptyEpochError("epoch " + std::to_string(epoch) + " skipped every item");
    ep.train_loss = epoch_sum / static_cast<double>(epoch_items);
    ep.val_loss = validation_loss(params, val_items, cfg.augment);
    // With no scorable validation item the last epoch is kept.
    if (ep.val_loss < best || std::isnan(ep.val_loss)) {
      if (!std::isnan(ep.val_loss)) best = ep.val_loss;
      result.params = params;
      log.best_epoch = epoch;
    }
    log.epochs.push_back(ep);
    if (opt.on_epoch) opt.on_epoch(ep);
  }
  return result;
}

/// Splits `items` with the configured ratio and seed, then trains.
inline TrainResult train(const TrainConfig& cfg, const std::vector<TrainItem>& items,
                         const TrainOptions& opt = {}) {
  validate(cfg);
  std::vector<std::size_t> idx(items.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto [tr, va] = split_dataset(idx, cfg.split_ratio, cfg.seed);
  std::vector<TrainItem> train_items, val_items;
  for (auto i : tr) train_items.push_back(items[i]);
  for (auto i : va) val_items.push_back(items[i]);
  return train(cfg, train_items, val_items, opt);
}

// ---------------------------------------------------------------------------
// Building training items from a dataset.

/// Sparse labels from an export document, matched by image id. Images
/// without an entry are left out; entries naming unknown images are errors.
inline std::vector<TrainItem> items_from_export(const std::vector<DatasetItem>& data,
                                                const ExportDocument& labels) {
  std::map<std::string, const DatasetItem*> by_id;
  for (const auto& d : data) by_id[d.image.id] = &d;
  std::vector<TrainItem> out;
  for (const auto& e : labels.images) {
    const auto it = by_id.find(e.image_id);
    if (it == by_id.end()) throw UnknownImageError("labels name unknown image '" + e.image_id + "'");
    SparseLabel label{e.points, Scheme::point_n10};
    validate(label, it->second->image.height(), it->second->image.width());
    out.push_back({it->second->image, std::move(label), std::nullopt});
  }
  return out;
}

/// Labels derived from dense masks: the full mask, a masked subset, or
/// simulated point / squiggle annotations.
inline std::vector<TrainItem> items_from_masks(const std::vector<DatasetItem>& data,
                                               Supervision sup, std::uint64_t seed,
                                               double mask_fraction = 0.90) {
  std::vector<TrainItem> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& d = data[i];
    if (!d.mask) throw ValueError("image '" + d.image.id + "' has no dense mask");
    const auto& m = *d.mask;
    const std::uint64_t s = derive_seed(seed, i);
    TrainItem item{d.image, {}, std::nullopt};
    switch (sup) {
      case Supervision::dense:
        item.label = dense_to_sparse(m);
        item.dense = m;
        break;
      case Supervision::masked_dense:
        item.label = mask_dense_labels(m, mask_fraction, s).first;
        break;
      case Supervision::point_n10:
        item.label = sample_points_per_class(m, 5, s);
        break;
      case Supervision::squiggle_n32:
        item.label = sample_from_squiggles(simulate_squiggles(m, d.image.id, mix_seed(seed, i)),
                                           32, m.height(), m.width(), s);
        break;
    }
    out.push_back(std::move(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transfer learning.

struct TransferResult {
  nn::ModelParams<float> params;
  TrainingLog pretrain_log;
  TrainingLog finetune_log;
};

/// Phase 1 trains on dense masks with grayscale conversion and random
/// inversion forced on; phase 2 starts from its parameters on sparse labels.
inline TransferResult pretrain_then_finetune(const TrainConfig& pretrain_cfg,
                                             const TrainConfig& finetune_cfg,
                                             const std::vector<DatasetItem>& dense_data,
                                             const std::vector<TrainItem>& sparse_data,
                                             const TrainOptions& finetune_opt = {}) {
  if (!(pretrain_cfg.model == finetune_cfg.model))
    throw ConfigMismatchError("pretrain model " + nn::config_echo(pretrain_cfg.model) +
                              "differs from finetune model " + nn::config_echo(finetune_cfg.model));
  TrainConfig pre = pretrain_cfg;
  pre.supervision = Supervision::dense;
  pre.augment.enable_grayscale = true;
  if (pre.augment.invert_probability == 0.0) pre.augment.invert_probability = 0.5;
  pre.pretrain_checkpoint.reset();
  auto phase1 = train(pre, items_from_masks(dense_data, Supervision::dense, pre.seed));

  TrainOptions opt = finetune_opt;
  opt.init = phase1.params;
  auto phase2 = train(finetune_cfg, sparse_data, opt);
  return {std::move(phase2.params), std::move(phase1.log), std::move(phase2.log)};
}

// ---------------------------------------------------------------------------
// Evaluation.

inline std::string supervision_label(Supervision s, double mask_fraction = 0.90) {
  switch (s) {
    case Supervision::dense: return "Dense";
    case Supervision::point_n10: return "Point (n=10)";
    case Supervision::squiggle_n32: return "Squiggle (n=32)";
    case Supervision::masked_dense: {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "Masked dense (%g%%)", mask_fraction * 100.0);
      return buf;
    }
  }
  return "?";
}

/// "None", "Inversion", "Grayscale and Inversion", "Geometric, Grayscale and Inversion".
inline std::string augmentation_label(const AugmentConfig& a) {
  std::vector<std::string> parts;
  if (a.geometric) parts.push_back("Geometric");
  if (a.enable_grayscale) parts.push_back("Grayscale");
  if (a.invert_probability > 0.0) parts.push_back("Inversion");
  if (parts.empty()) return "None";
  std::string s = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i)
    s += (i + 1 == parts.size() ? " and " : ", ") + parts[i];
  return s;
}

/// Forward pass, threshold and pooled metrics over fully segmented images.
/// Three-channel images are grayscaled for single-channel models.
inline MetricsReport evaluate(const nn::ModelParams<float>& params,
                              const std::vector<DatasetItem>& holdout, double t = 0.5,
                              std::string supervision = "", std::string augmentations = "") {
  if (holdout.empty()) throw TooFewItemsError("holdout is empty");
  nn::UNet<float> net(params.config);
  std::vector<BasicPrediction<float>> preds;
  std::vector<DenseMask> truths;
  std::vector<std::string> ids;
  for (const auto& h : holdout) {
    if (!h.mask) throw ValueError("holdout image '" + h.image.id + "' has no dense mask");
    ImageSample img = h.image;
    if (img.channels() == 3 && params.config.in_channels == 1) img = to_grayscale(img);
    preds.push_back(net.forward(params, nn::to_network_input<float>(img)));
    truths.push_back(*h.mask);
    ids.push_back(h.image.id);
  }
  return evaluate_set(preds, truths, t, std::move(supervision), std::move(augmentations), ids);
}

inline nlohmann::json training_log_to_json(const TrainingLog& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"skipped", e.skipped}});
  nlohmann::json batches = nlohmann::json::array();
  for (const auto& b : log.batches)
    batches.push_back({{"epoch", b.epoch}, {"ids", b.ids}, {"loss", b.loss}});
  return {{"initial_val_loss", log.initial_val_loss},
          {"best_epoch", log.best_epoch},
          {"epochs", std::move(epochs)},
          {"batches", std::move(batches)},
          {"warnings", log.warnings}};
}

}  // namespace wsseg::train
