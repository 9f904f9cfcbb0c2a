#pragma once

#include "wsseg/types.hpp"

namespace wsseg {

/// The loss-selection raster for a sparse label: true exactly at the
/// annotated coordinates.
inline EvaluationMask build_eval_mask(const SparseLabel& label, int height, int width) {
  validate(label, height, width);
  EvaluationMask mask{Raster<std::uint8_t>(height, width, 1, 0)};
  for (const auto& p : label.points) mask.selected(p.row, p.col) = 1;
  return mask;
}

/// Dense supervision as a sparse label: every pixel annotated.
inline SparseLabel dense_to_sparse(const DenseMask& dense) {
  SparseLabel label;
  label.scheme = Scheme::masked_dense;
  label.points.reserve(dense.classes.size());
  for (int r = 0; r < dense.height(); ++r)
    for (int c = 0; c < dense.width(); ++c) label.points.push_back({r, c, dense(r, c)});
  return label;
}

}  // namespace wsseg
