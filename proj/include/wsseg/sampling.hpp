#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/eval_mask.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

/// Knobs of the three sparse-supervision generators. Defaults give the
/// 5+5 point scheme and the 32-point squiggle scheme.
struct SamplerConfig {
  std::uint64_t seed = 0;
  int points_per_class = 5;
  int squiggle_sample_n = 32;
  double mask_fraction = 0.90;
};

inline void validate(const SamplerConfig& cfg) {
  if (cfg.points_per_class < 1) throw ConfigError("points_per_class must be >= 1");
  if (cfg.squiggle_sample_n < 2) throw ConfigError("squiggle_sample_n must be >= 2");
  if (!(cfg.mask_fraction >= 0.0 && cfg.mask_fraction < 1.0))
    throw ConfigError("mask_fraction must lie in [0,1)");
}

using Rng = std::mt19937_64;

/// Per-worker seed derivation used by data loaders.
inline std::uint64_t derive_seed(std::uint64_t dataset_seed, std::uint64_t index) {
  return dataset_seed ^ index;
}

namespace detail {

/// First `k` entries of a partial Fisher-Yates shuffle of `items`.
template <typename T>
std::vector<T> draw_without_replacement(std::vector<T> items, std::size_t k, Rng& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(k);
  return items;
}

}  // namespace detail

/// Hides `fraction` of the dense labels: keeps round((1-fraction)*H*W)
/// pixels chosen uniformly without replacement.
inline std::pair<SparseLabel, EvaluationMask> mask_dense_labels(const DenseMask& mask,
                                                                double fraction,
                                                                std::uint64_t seed) {
  validate(mask);
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ValueError("fraction must lie in [0,1)");
  const std::size_t total = mask.classes.size();
  const auto keep = static_cast<std::size_t>(std::llround((1.0 - fraction) * total));
  if (keep == 0) throw DegenerateError("masking leaves no labelled pixel");

  std::vector<std::size_t> chosen;
  if (keep == total) {
    chosen.resize(total);
    for (std::size_t i = 0; i < total; ++i) chosen[i] = i;
  } else {
    Rng rng(seed);
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    chosen = detail::draw_without_replacement(std::move(all), keep, rng);
    std::sort(chosen.begin(), chosen.end());
  }
  SparseLabel label;
  label.scheme = Scheme::masked_dense;
  label.points.reserve(chosen.size());
  const int w = mask.width();
  for (auto idx : chosen) {
    const int r = static_cast<int>(idx / w), c = static_cast<int>(idx % w);
    label.points.push_back({r, c, mask(r, c)});
  }
  EvaluationMask eval = build_eval_mask(label, mask.height(), mask.width());
  return {std::move(label), std::move(eval)};
}

/// k points of each class, uniform without replacement within the class.
inline SparseLabel sample_points_per_class(const DenseMask& mask, int k, std::uint64_t seed) {
  validate(mask);
  if (k < 1) throw ValueError("k must be >= 1");
  std::array<std::vector<Pixel>, 2> by_class;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c) by_class[mask(r, c)].push_back({r, c});
  for (int cls : {kShip, kBackground})
    if (by_class[cls].size() < static_cast<std::size_t>(k))
      throw InsufficientClassError(
          cls, std::string(cls == kShip ? "ship" : "background") + " class has " +
                   std::to_string(by_class[cls].size()) + " pixels, need " + std::to_string(k));
  Rng rng(seed);
  SparseLabel label;
  label.scheme = Scheme::point_n10;
  for (int cls : {kBackground, kShip})
    for (const auto& p : detail::draw_without_replacement(by_class[cls], k, rng))
      label.points.push_back({p.row, p.col, cls});
  return label;
}

/// Pixels covered by each class after rasterizing a squiggle set, in
/// row-major order.
struct SquiggleRaster {
  std::array<std::vector<Pixel>, 2> pixels;
  std::size_t count(int cls) const { return pixels[cls].size(); }
};

/// 8-connected integer line walk between two vertices, endpoints included.
inline std::vector<Pixel> line_pixels(Pixel a, Pixel b) {
  std::vector<Pixel> out;
  int r = a.row, c = a.col;
  const int dr = std::abs(b.row - a.row), dc = std::abs(b.col - a.col);
  const int sr = a.row < b.row ? 1 : -1, sc = a.col < b.col ? 1 : -1;
  int err = dc - dr;
  while (true) {
    out.push_back({r, c});
    if (r == b.row && c == b.col) break;
    const int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c += sc;
    }
    if (e2 < dc) {
      err += dc;
      r += sr;
    }
  }
  return out;
}

/// Rasterizes each stroke segment by segment, dilates by the stroke radius
/// (Chebyshev disc) and clips to bounds. Later strokes overwrite earlier ones.
inline SquiggleRaster rasterize_squiggles(const SquiggleSet& squiggles, int height, int width) {
  validate(squiggles, height, width, /*require_both_classes=*/false);
  Raster<std::int8_t> owner(height, width, 1, -1);
  for (const auto& stroke : squiggles.strokes) {
    std::vector<Pixel> centre;
    if (stroke.polyline.size() == 1) {
      centre.push_back(stroke.polyline.front());
    } else {
      for (std::size_t i = 0; i + 1 < stroke.polyline.size(); ++i) {
        auto seg = line_pixels(stroke.polyline[i], stroke.polyline[i + 1]);
        centre.insert(centre.end(), seg.begin(), seg.end());
      }
    }
    for (const auto& p : centre)
      for (int dr = -stroke.radius; dr <= stroke.radius; ++dr)
        for (int dc = -stroke.radius; dc <= stroke.radius; ++dc) {
          const int r = p.row + dr, c = p.col + dc;
          if (owner.in_bounds(r, c)) owner(r, c) = static_cast<std::int8_t>(stroke.cls);
        }
  }
  SquiggleRaster out;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (owner(r, c) >= 0) out.pixels[owner(r, c)].push_back({r, c});
  return out;
}

/// Largest-remainder split of n points in proportion to per-class pixel
/// counts, with at least one point per class and no class over capacity.
inline std::array<std::size_t, 2> squiggle_quotas(std::size_t n,
                                                  std::array<std::size_t, 2> pixels) {
  const std::size_t total = pixels[0] + pixels[1];
  std::array<std::size_t, 2> quota{};
  std::array<std::size_t, 2> remainder{};
  for (int c = 0; c < 2; ++c) {
    quota[c] = n * pixels[c] / total;
    remainder[c] = n * pixels[c] % total;
  }
  std::size_t left = n - quota[0] - quota[1];  // 0 or 1 for two classes
  while (left > 0) {
    int best = remainder[kShip] > remainder[kBackground] ? kShip
               : remainder[kBackground] > remainder[kShip] ? kBackground
               : (pixels[kShip] >= pixels[kBackground] ? kShip : kBackground);
    ++quota[best];
    remainder[best] = 0;
    --left;
  }
  for (int c = 0; c < 2; ++c)
    if (quota[c] == 0 && pixels[c] > 0) {
      ++quota[c];
      --quota[1 - c];
    }
  for (int c = 0; c < 2; ++c)
    if (quota[c] > pixels[c]) {
      const std::size_t excess = quota[c] - pixels[c];
      quota[c] = pixels[c];
      quota[1 - c] = std::min(quota[1 - c] + excess, pixels[1 - c]);
    }
  return quota;
}

/// Weighted subsample of rasterized squiggles: per-class quotas follow the
/// share of drawn pixels; points are drawn uniformly within each class.
inline SparseLabel sample_from_squiggles(const SquiggleSet& squiggles, int n, int height,
                                         int width, std::uint64_t seed) {
  if (n < 2) throw ValueError("n must be >= 2");
  const SquiggleRaster raster = rasterize_squiggles(squiggles, height, width);
  for (int cls : {kShip, kBackground})
    if (raster.count(cls) == 0)
      throw MissingClassError(cls, std::string("no rasterized ") +
                                       (cls == kShip ? "ship" : "background") + " pixels");
  const auto quota =
      squiggle_quotas(static_cast<std::size_t>(n), {raster.count(0), raster.count(1)});
  Rng rng(seed);
  SparseLabel label;
  label.scheme = Scheme::squiggle_n32;
  for (int cls : {kBackground, kShip})
    for (const auto& p : detail::draw_without_replacement(raster.pixels[cls], quota[cls], rng))
      label.points.push_back({p.row, p.col, cls});
  return label;
}

}  // namespace wsseg
