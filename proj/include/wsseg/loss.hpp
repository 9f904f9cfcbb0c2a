#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "wsseg/error.hpp"
#include "wsseg/raster.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

/// Per-pixel class probabilities, channel 0 = background, 1 = ship.
template <typename T>
struct BasicPrediction {
  Raster<T> probs;

  BasicPrediction() = default;
  BasicPrediction(int height, int width) : probs(height, width, 2) {}
  explicit BasicPrediction(Raster<T> p) : probs(std::move(p)) {}

  int height() const noexcept { return probs.height(); }
  int width() const noexcept { return probs.width(); }
  T ship(int r, int c) const noexcept { return probs(r, c, kShip); }
};

using Prediction = BasicPrediction<double>;

template <typename T>
void validate(const BasicPrediction<T>& pred, double tol = 1e-6) {
  if (pred.probs.channels() != 2) throw ShapeError("prediction must have two class planes");
  for (int r = 0; r < pred.height(); ++r)
    for (int c = 0; c < pred.width(); ++c) {
      const T a = pred.probs(r, c, 0), b = pred.probs(r, c, 1);
      if (a < 0 || b < 0 || std::abs(static_cast<double>(a + b) - 1.0) > tol)
        throw ValueError("prediction probabilities must be non-negative and sum to 1");
    }
}

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

template <typename T>
void check_loss_inputs(const BasicPrediction<T>& pred, const SparseLabel& target,
                       const EvaluationMask& mask) {
  if (pred.probs.channels() != 2) throw ShapeError("prediction must have two class planes");
  if (!mask.selected.same_extent(pred.probs))
    throw ShapeError("evaluation mask shape differs from prediction");
  const std::size_t selected = mask.popcount();
  if (selected == 0) throw EmptyMaskError("evaluation mask selects no pixel");
  if (selected != target.points.size())
    throw ValueError("evaluation mask does not match the annotated points");
  for (const auto& p : target.points) {
    if (!mask.selected.in_bounds(p.row, p.col))
      throw BoundsError("annotated point outside the prediction");
    if (!mask.selected(p.row, p.col))
      throw ValueError("annotated point not selected by the evaluation mask");
  }
}

}  // namespace detail

/// Masked pixel-wise cross-entropy: the mean negative log-likelihood of the
/// annotated class over the pixels selected by `mask`. Unselected pixels
/// contribute nothing. Probabilities are floored at 1e-12.
template <typename T>
T pwce_loss(const BasicPrediction<T>& pred, const SparseLabel& target,
            const EvaluationMask& mask) {
  detail::check_loss_inputs(pred, target, mask);
  double sum = 0;
  for (const auto& p : target.points) {
    const double prob =
        std::clamp(static_cast<double>(pred.probs(p.row, p.col, p.cls)), kProbabilityFloor, 1.0);
    sum -= std::log(prob);
  }
  return static_cast<T>(sum / static_cast<double>(target.points.size()));
}

/// Loss and its gradient with respect to every probability entry. The
/// gradient is zero off the mask and wherever the floor is active.
template <typename T>
T pwce_loss_with_grad(const BasicPrediction<T>& pred, const SparseLabel& target,
                      const EvaluationMask& mask, Raster<T>& grad) {
  detail::check_loss_inputs(pred, target, mask);
  grad = Raster<T>(pred.height(), pred.width(), 2, T{0});
  const T inv_n = static_cast<T>(1) / static_cast<T>(target.points.size());
  double sum = 0;
  for (const auto& p : target.points) {
    const T raw = pred.probs(p.row, p.col, p.cls);
    sum -= std::log(std::clamp(static_cast<double>(raw), kProbabilityFloor, 1.0));
    if (raw > static_cast<T>(kProbabilityFloor) && raw < static_cast<T>(1))
      grad(p.row, p.col, p.cls) = -inv_n / raw;
  }
  return static_cast<T>(sum / static_cast<double>(target.points.size()));
}

}  // namespace wsseg
