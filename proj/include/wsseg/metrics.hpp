#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/loss.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

/// Ship iff the ship probability is >= t.
template <typename T>
DenseMask threshold_prediction(const BasicPrediction<T>& pred, double t = 0.5) {
  if (!(t > 0.0 && t < 1.0)) throw ValueError("threshold must lie in (0,1)");
  if (pred.probs.channels() != 2) throw ShapeError("prediction must have two class planes");
  DenseMask out(pred.height(), pred.width());
  for (int r = 0; r < pred.height(); ++r)
    for (int c = 0; c < pred.width(); ++c)
      out(r, c) = static_cast<double>(pred.ship(r, c)) >= t ? kShip : kBackground;
  return out;
}

/// Confusion counts with ship as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::uint64_t total() const { return tp + fp + fn + tn; }
};

inline ConfusionCounts confusion(const DenseMask& pred, const DenseMask& truth) {
  if (pred.height() != truth.height() || pred.width() != truth.width())
    throw ShapeError("prediction and truth shapes differ");
  ConfusionCounts k;
  const auto& a = pred.classes.data();
  const auto& b = truth.classes.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool p = a[i] == kShip, t = b[i] == kShip;
    if (p && t) ++k.tp;
    else if (p) ++k.fp;
    else if (t) ++k.fn;
    else ++k.tn;
  }
  return k;
}

namespace detail {
inline double ratio_or_one(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline double jaccard(const ConfusionCounts& k) {
  return detail::ratio_or_one(k.tp, k.tp + k.fp + k.fn);
}

/// Ship-class intersection over union; 1.0 when both ship sets are empty.
inline double jaccard(const DenseMask& pred, const DenseMask& truth) {
  return jaccard(confusion(pred, truth));
}

enum class PrMode { ship_class, micro_all_pixels };

inline std::pair<double, double> precision_recall(const ConfusionCounts& k, PrMode mode) {
  if (mode == PrMode::ship_class)
    return {detail::ratio_or_one(k.tp, k.tp + k.fp), detail::ratio_or_one(k.tp, k.tp + k.fn)};
  // Micro-averaged over both classes every pixel is one prediction, so
  // precision and recall both reduce to pixel accuracy.
  const double acc = detail::ratio_or_one(k.tp + k.tn, k.total());
  return {acc, acc};
}

inline std::pair<double, double> precision_recall(const DenseMask& pred, const DenseMask& truth,
                                                  PrMode mode) {
  return precision_recall(confusion(pred, truth), mode);
}

/// Thresholds every prediction and pools the counts over the whole set.
template <typename T>
MetricsReport evaluate_set(const std::vector<BasicPrediction<T>>& preds,
                           const std::vector<DenseMask>& truths, double t,
                           std::string supervision = "", std::string augmentations = "",
                           const std::vector<std::string>& image_ids = {}) {
  if (preds.size() != truths.size())
    throw LengthMismatchError("got " + std::to_string(preds.size()) + " predictions for " +
                              std::to_string(truths.size()) + " masks");
  if (preds.empty()) throw LengthMismatchError("evaluation set is empty");
  MetricsReport report;
  ConfusionCounts pooled;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto k = confusion(threshold_prediction(preds[i], t), truths[i]);
    pooled += k;
    const auto [p, r] = precision_recall(k, PrMode::ship_class);
    report.per_image.push_back(
        {i < image_ids.size() ? image_ids[i] : std::to_string(i), p, r, jaccard(k)});
  }
  MetricsRow row;
  row.supervision = std::move(supervision);
  row.augmentations = std::move(augmentations);
  std::tie(row.precision, row.recall) = precision_recall(pooled, PrMode::ship_class);
  std::tie(row.micro_precision, row.micro_recall) =
      precision_recall(pooled, PrMode::micro_all_pixels);
  row.jaccard = jaccard(pooled);
  report.rows.push_back(std::move(row));
  return report;
}

}  // namespace wsseg
