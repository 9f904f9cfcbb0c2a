#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/sampling.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

struct AugmentConfig {
  double rotation_degrees_max = 15.0;
  std::array<double, 2> scale_range{0.8, 1.2};
  std::optional<std::pair<int, int>> crop_size;  // (height, width)
  bool enable_grayscale = false;
  double invert_probability = 0.5;
  double flip_probability = 0.0;
  bool geometric = true;
  std::uint64_t seed = 0;
};

inline void validate(const AugmentConfig& cfg) {
  if (!(cfg.scale_range[0] > 0.0) || cfg.scale_range[1] < cfg.scale_range[0])
    throw ConfigError("scale_range must satisfy 0 < lo <= hi");
  if (!(cfg.invert_probability >= 0.0 && cfg.invert_probability <= 1.0))
    throw ConfigError("invert_probability must lie in [0,1]");
  if (!(cfg.flip_probability >= 0.0 && cfg.flip_probability <= 1.0))
    throw ConfigError("flip_probability must lie in [0,1]");
  if (cfg.rotation_degrees_max < 0.0) throw ConfigError("rotation_degrees_max must be >= 0");
  if (cfg.crop_size && (cfg.crop_size->first < 1 || cfg.crop_size->second < 1))
    throw ConfigError("crop_size must be positive");
}

/// Intensities are kept on a 2^-24 grid, on which 1 - v is exact in float
/// and inversion is therefore an involution.
inline float quantize_intensity(double v) {
  constexpr double kGrid = 16777216.0;  // 2^24
  return static_cast<float>(std::nearbyint(std::clamp(v, 0.0, 1.0) * kGrid) / kGrid);
}

inline ImageSample to_grayscale(const ImageSample& image) {
  if (image.channels() == 1) return image;
  if (image.channels() != 3) throw ShapeError("to_grayscale expects 1 or 3 channels");
  ImageSample out{image.id, Raster<float>(image.height(), image.width(), 1), Polarity::visible,
                  image.source};
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      out.pixels(r, c) = quantize_intensity(0.299 * image.pixels(r, c, 0) +
                                            0.587 * image.pixels(r, c, 1) +
                                            0.114 * image.pixels(r, c, 2));
  return out;
}

inline ImageSample invert(const ImageSample& image) {
  if (image.channels() != 1) throw ShapeError("inversion expects a single-channel image");
  ImageSample out = image;
  for (auto& v : out.pixels.data()) v = quantize_intensity(1.0 - quantize_intensity(v));
  if (out.polarity == Polarity::white_hot) out.polarity = Polarity::black_hot;
  else if (out.polarity == Polarity::black_hot) out.polarity = Polarity::white_hot;
  return out;
}

/// Inverts (v -> 1 - v, white-hot <-> black-hot) with the given probability.
inline ImageSample random_invert(const ImageSample& image, double probability,
                                 std::uint64_t seed) {
  if (image.channels() != 1) throw ShapeError("random_invert expects a single-channel image");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < probability ? invert(image) : image;
}

/// One sampled geometric map. Rotation is about the canvas centre, counter-
/// clockwise in (row, col) space; multiples of 90 degrees are exact and odd
/// multiples swap the canvas extent. Crop offsets are tried in order; the
/// first window that keeps every class present in the sparse points (or, if
/// absent, the dense mask) wins, otherwise no crop is applied.
struct GeometricParams {
  double angle_degrees = 0.0;
  double scale = 1.0;
  bool flip_rows = false;  // vertical flip, applied after rotation/scale
  bool flip_cols = false;  // horizontal flip
  std::optional<std::pair<int, int>> crop_size;
  std::vector<Pixel> crop_offsets;
};

inline constexpr int kCropAttempts = 9;  // first draw plus 8 retries

struct GeometricResult {
  ImageSample image;
  std::optional<DenseMask> dense;
  std::optional<SparseLabel> sparse;
  bool crop_applied = false;
  std::size_t dropped_points = 0;
};

namespace detail {

struct AffineMap {
  double cos_a = 1, sin_a = 0, scale = 1;
  double in_cr = 0, in_cc = 0, out_cr = 0, out_cc = 0;
  int out_h = 0, out_w = 0;
  bool flip_rows = false, flip_cols = false;

  std::array<double, 2> forward(double r, double c) const {
    const double dr = r - in_cr, dc = c - in_cc;
    double orow = out_cr + scale * (cos_a * dr + sin_a * dc);
    double ocol = out_cc + scale * (-sin_a * dr + cos_a * dc);
    if (flip_rows) orow = out_h - 1 - orow;
    if (flip_cols) ocol = out_w - 1 - ocol;
    return {orow, ocol};
  }
  std::array<double, 2> inverse(double orow, double ocol) const {
    if (flip_rows) orow = out_h - 1 - orow;
    if (flip_cols) ocol = out_w - 1 - ocol;
    const double dr = (orow - out_cr) / scale, dc = (ocol - out_cc) / scale;
    return {in_cr + cos_a * dr - sin_a * dc, in_cc + sin_a * dr + cos_a * dc};
  }
};

inline AffineMap make_affine(const GeometricParams& p, int in_h, int in_w) {
  AffineMap m;
  const double turns = p.angle_degrees / 90.0;
  const bool quarter = std::fmod(p.angle_degrees, 90.0) == 0.0;
  if (quarter) {
    const long k = ((std::lround(turns) % 4) + 4) % 4;
    constexpr int cs[4] = {1, 0, -1, 0};
    constexpr int sn[4] = {0, 1, 0, -1};
    m.cos_a = cs[k];
    m.sin_a = sn[k];
  } else {
    const double rad = p.angle_degrees * std::numbers::pi / 180.0;
    m.cos_a = std::cos(rad);
    m.sin_a = std::sin(rad);
  }
  const bool swap = quarter && (std::lround(turns) % 2 != 0);
  m.out_h = swap ? in_w : in_h;
  m.out_w = swap ? in_h : in_w;
  m.scale = p.scale;
  m.in_cr = (in_h - 1) / 2.0;
  m.in_cc = (in_w - 1) / 2.0;
  m.out_cr = (m.out_h - 1) / 2.0;
  m.out_cc = (m.out_w - 1) / 2.0;
  m.flip_rows = p.flip_rows;
  m.flip_cols = p.flip_cols;
  return m;
}

inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

inline float bilinear_clamped(const Raster<float>& img, int ch, double r, double c) {
  const int h = img.height(), w = img.width();
  r = std::clamp(r, 0.0, static_cast<double>(h - 1));
  c = std::clamp(c, 0.0, static_cast<double>(w - 1));
  const int r0 = static_cast<int>(std::floor(r)), c0 = static_cast<int>(std::floor(c));
  const int r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
  const double fr = r - r0, fc = c - c0;
  const double top = img(r0, c0, ch) * (1 - fc) + img(r0, c1, ch) * fc;
  const double bot = img(r1, c0, ch) * (1 - fc) + img(r1, c1, ch) * fc;
  return quantize_intensity(top * (1 - fr) + bot * fr);
}

}  // namespace detail

/// Samples rotation, scale, flips and crop candidates from the config.
inline GeometricParams draw_geometric_params(const AugmentConfig& cfg, int height, int width,
                                             std::uint64_t seed) {
  validate(cfg);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GeometricParams p;
  p.angle_degrees = cfg.rotation_degrees_max > 0.0
                        ? (unit(rng) * 2.0 - 1.0) * cfg.rotation_degrees_max
                        : 0.0;
  p.scale = cfg.scale_range[0] + unit(rng) * (cfg.scale_range[1] - cfg.scale_range[0]);
  p.flip_cols = unit(rng) < cfg.flip_probability;
  p.flip_rows = false;
  if (cfg.crop_size) {
    const auto m = detail::make_affine(p, height, width);
    const int ch = std::min(cfg.crop_size->first, m.out_h);
    const int cw = std::min(cfg.crop_size->second, m.out_w);
    p.crop_size = std::make_pair(ch, cw);
    std::uniform_int_distribution<int> oy(0, m.out_h - ch), ox(0, m.out_w - cw);
    for (int i = 0; i < kCropAttempts; ++i) {
      const int y = oy(rng);
      p.crop_offsets.push_back({y, ox(rng)});
    }
  }
  return p;
}

/// Applies one geometric map to the image (bilinear, edge replication), the
/// dense mask (nearest neighbour, edge replication) and the sparse points
/// (coordinate map, round half up). Points leaving the canvas are dropped;
/// points landing on an already occupied pixel keep the first arrival.
inline GeometricResult apply_geometric(const ImageSample& image, const DenseMask* dense,
                                       const SparseLabel* sparse, const GeometricParams& params) {
  if (!dense && !sparse) throw ValueError("geometric_transform needs a dense or sparse label");
  if (!(params.scale > 0.0)) throw ValueError("scale must be positive");
  const int in_h = image.height(), in_w = image.width();
  if (dense && !dense->classes.same_extent(image.pixels))
    throw ShapeError("dense mask shape differs from image");
  if (sparse) validate(*sparse, in_h, in_w);
  const auto map = detail::make_affine(params, in_h, in_w);

  // Canvas-level labels first; the crop is chosen against them.
  std::optional<DenseMask> canvas_mask;
  if (dense) {
    canvas_mask.emplace(map.out_h, map.out_w);
    for (int r = 0; r < map.out_h; ++r)
      for (int c = 0; c < map.out_w; ++c) {
        const auto src = map.inverse(r, c);
        const int sr = std::clamp(detail::round_half_up(src[0]), 0, in_h - 1);
        const int sc = std::clamp(detail::round_half_up(src[1]), 0, in_w - 1);
        (*canvas_mask)(r, c) = (*dense)(sr, sc);
      }
  }
  std::vector<LabeledPoint> canvas_points;
  std::size_t dropped = 0;
  if (sparse) {
    std::set<std::pair<int, int>> taken;
    for (const auto& p : sparse->points) {
      const auto dst = map.forward(p.row, p.col);
      const int r = detail::round_half_up(dst[0]), c = detail::round_half_up(dst[1]);
      if (r < 0 || c < 0 || r >= map.out_h || c >= map.out_w || !taken.emplace(r, c).second) {
        ++dropped;
        continue;
      }
      canvas_points.push_back({r, c, p.cls});
    }
  }

  int off_r = 0, off_c = 0, out_h = map.out_h, out_w = map.out_w;
  bool cropped = false;
  if (params.crop_size) {
    const int ch = std::min(params.crop_size->first, map.out_h);
    const int cw = std::min(params.crop_size->second, map.out_w);
    auto keeps_classes = [&](Pixel off) {
      std::array<bool, 2> before{false, false}, after{false, false};
      auto inside = [&](int r, int c) {
        return r >= off.row && c >= off.col && r < off.row + ch && c < off.col + cw;
      };
      if (sparse) {
        for (const auto& p : canvas_points) {
          before[p.cls] = true;
          if (inside(p.row, p.col)) after[p.cls] = true;
        }
      } else {
        for (int r = 0; r < map.out_h; ++r)
          for (int c = 0; c < map.out_w; ++c) {
            const int cls = (*canvas_mask)(r, c);
            before[cls] = true;
            if (inside(r, c)) after[cls] = true;
          }
      }
      return (!before[0] || after[0]) && (!before[1] || after[1]);
    };
    for (const auto& off : params.crop_offsets) {
      if (off.row < 0 || off.col < 0 || off.row + ch > map.out_h || off.col + cw > map.out_w)
        continue;
      if (keeps_classes(off)) {
        off_r = off.row;
        off_c = off.col;
        out_h = ch;
        out_w = cw;
        cropped = true;
        break;
      }
    }
  }

  GeometricResult result;
  result.crop_applied = cropped;
  result.image = ImageSample{image.id, Raster<float>(out_h, out_w, image.channels()),
                             image.polarity, image.source};
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) {
      const auto src = map.inverse(r + off_r, c + off_c);
      for (int ch = 0; ch < image.channels(); ++ch)
        result.image.pixels(r, c, ch) = detail::bilinear_clamped(image.pixels, ch, src[0], src[1]);
    }
  if (canvas_mask) {
    DenseMask out(out_h, out_w);
    for (int r = 0; r < out_h; ++r)
      for (int c = 0; c < out_w; ++c) out(r, c) = (*canvas_mask)(r + off_r, c + off_c);
    result.dense = std::move(out);
  }
  if (sparse) {
    SparseLabel out;
    out.scheme = sparse->scheme;
    for (const auto& p : canvas_points) {
      const int r = p.row - off_r, c = p.col - off_c;
      if (r < 0 || c < 0 || r >= out_h || c >= out_w) {
        ++dropped;
        continue;
      }
      out.points.push_back({r, c, p.cls});
    }
    result.sparse = std::move(out);
  }
  result.dropped_points = dropped;
  return result;
}

/// Draws one map from `cfg` with `seed` and applies it to all supplied
/// labels.
inline GeometricResult geometric_transform(const ImageSample& image, const DenseMask* dense,
                                           const SparseLabel* sparse, const AugmentConfig& cfg,
                                           std::uint64_t seed) {
  const auto params = draw_geometric_params(cfg, image.height(), image.width(), seed);
  return apply_geometric(image, dense, sparse, params);
}

}  // namespace wsseg
