#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wsseg/augment.hpp"
#include "wsseg/error.hpp"
#include "wsseg/sampling.hpp"
#include "wsseg/train/config.hpp"
#include "wsseg/types.hpp"

// Synthetic stand-in for aerial ship imagery: filled ellipses ("ships")
// over a flat sea with additive Gaussian noise.

namespace wsseg::train {

struct PolarityMix {
  double white_hot = 0.5;
  double black_hot = 0.5;
  double visible = 0.0;
};

struct SyntheticSpec {
  int count = 200;
  int height = 128;
  int width = 128;
  int ships_min = 1;
  int ships_max = 3;
  double semi_major_min = 7.0;
  double semi_major_max = 16.0;
  double semi_minor_min = 3.5;
  double semi_minor_max = 7.0;
  double noise_sigma = 0.05;
  PolarityMix polarity;
};

inline void validate(const SyntheticSpec& s) {
  if (s.count < 1) throw SpecError("count must be >= 1");
  if (s.height < kMinImageSide || s.width < kMinImageSide)
    throw SpecError("image extent must be at least 16x16");
  if (s.ships_min < 1 || s.ships_max < s.ships_min) throw SpecError("ships range must be 1 <= min <= max");
  if (!(s.semi_major_min > 0) || s.semi_major_max < s.semi_major_min)
    throw SpecError("semi-major range must be positive and ordered");
  if (!(s.semi_minor_min > 0) || s.semi_minor_max < s.semi_minor_min)
    throw SpecError("semi-minor range must be positive and ordered");
  if (2 * s.semi_major_max + 2 > std::min(s.height, s.width))
    throw SpecError("ellipses do not fit inside the image");
  if (s.noise_sigma < 0) throw SpecError("noise_sigma must be >= 0");
  const auto& m = s.polarity;
  if (m.white_hot < 0 || m.black_hot < 0 || m.visible < 0 ||
      !(m.white_hot + m.black_hot + m.visible > 0))
    throw SpecError("polarity mix needs non-negative weights with a positive sum");
}

inline SyntheticSpec parse_synthetic_spec(std::string_view text) {
  using namespace detail;
  SyntheticSpec s;
  for (const auto& [k, v] : parse_key_values(text)) {
    if (k == "count") s.count = static_cast<int>(to_int(k, v));
    else if (k == "height") s.height = static_cast<int>(to_int(k, v));
    else if (k == "width") s.width = static_cast<int>(to_int(k, v));
    else if (k == "ships_min") s.ships_min = static_cast<int>(to_int(k, v));
    else if (k == "ships_max") s.ships_max = static_cast<int>(to_int(k, v));
    else if (k == "semi_major_min") s.semi_major_min = to_double(k, v);
    else if (k == "semi_major_max") s.semi_major_max = to_double(k, v);
    else if (k == "semi_minor_min") s.semi_minor_min = to_double(k, v);
    else if (k == "semi_minor_max") s.semi_minor_max = to_double(k, v);
    else if (k == "noise_sigma") s.noise_sigma = to_double(k, v);
    else if (k == "polarity.white_hot") s.polarity.white_hot = to_double(k, v);
    else if (k == "polarity.black_hot") s.polarity.black_hot = to_double(k, v);
    else if (k == "polarity.visible") s.polarity.visible = to_double(k, v);
    else throw SpecError("unknown spec key '" + k + "'");
  }
  validate(s);
  return s;
}

struct Ellipse {
  double center_row = 0, center_col = 0;
  double semi_major = 1, semi_minor = 1;
  double angle = 0;  // radians, major axis measured from the row axis

  bool contains(double r, double c) const {
    const double dr = r - center_row, dc = c - center_col;
    const double u = dr * std::cos(angle) + dc * std::sin(angle);
    const double v = -dr * std::sin(angle) + dc * std::cos(angle);
    return (u * u) / (semi_major * semi_major) + (v * v) / (semi_minor * semi_minor) <= 1.0;
  }
};

struct SyntheticItem {
  ImageSample image;
  DenseMask mask;
  std::vector<Ellipse> ships;
};

/// Mixes a dataset seed with an item index (splitmix64 finaliser).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline SyntheticItem generate_synthetic_item(const SyntheticSpec& spec, std::uint64_t seed,
                                             int index) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const auto& mix = spec.polarity;
  const double pick = unit(rng) * (mix.white_hot + mix.black_hot + mix.visible);
  const Polarity polarity = pick < mix.white_hot                 ? Polarity::white_hot
                            : pick < mix.white_hot + mix.black_hot ? Polarity::black_hot
                                                                   : Polarity::visible;
  SyntheticItem item;
  const int ships = std::uniform_int_distribution<int>(spec.ships_min, spec.ships_max)(rng);
  for (int k = 0; k < ships; ++k) {
    Ellipse e;
    e.semi_major = uniform(spec.semi_major_min, spec.semi_major_max);
    e.semi_minor = std::min(e.semi_major, uniform(spec.semi_minor_min, spec.semi_minor_max));
    e.angle = uniform(0.0, std::numbers::pi);
    const double m = e.semi_major + 1.0;
    e.center_row = uniform(m, spec.height - 1 - m);
    e.center_col = uniform(m, spec.width - 1 - m);
    item.ships.push_back(e);
  }

  item.mask = DenseMask(spec.height, spec.width);
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c)
      for (const auto& e : item.ships)
        if (e.contains(r, c)) {
          item.mask(r, c) = kShip;
          break;
        }

  const int channels = polarity == Polarity::visible ? 3 : 1;
  std::array<double, 3> sea{}, hull{};
  switch (polarity) {
    case Polarity::white_hot: {
      sea[0] = uniform(0.12, 0.35);
      hull[0] = sea[0] + uniform(0.3, 0.5);
      break;
    }
    case Polarity::black_hot: {
      sea[0] = uniform(0.65, 0.88);
      hull[0] = sea[0] - uniform(0.3, 0.5);
      break;
    }
    case Polarity::visible: {
      sea = {uniform(0.02, 0.12), uniform(0.15, 0.3), uniform(0.3, 0.5)};
      const double grey = uniform(0.7, 0.9);
      hull = {grey, grey * uniform(0.92, 1.0), grey * uniform(0.9, 1.0)};
      break;
    }
  }
  char id[32];
  std::snprintf(id, sizeof(id), "synth_%05d", index);
  item.image.id = id;
  item.image.polarity = polarity;
  item.image.source = Source::synthetic;
  item.image.pixels = Raster<float>(spec.height, spec.width, channels);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int ch = 0; ch < channels; ++ch)
    for (int r = 0; r < spec.height; ++r)
      for (int c = 0; c < spec.width; ++c) {
        const double base = item.mask(r, c) == kShip ? hull[ch] : sea[ch];
        const double n = spec.noise_sigma > 0 ? spec.noise_sigma * noise(rng) : 0.0;
        item.image.pixels(r, c, ch) = quantize_intensity(base + n);
      }
  return item;
}

/// Deterministic given (spec, seed); item i depends only on (spec, seed, i).
inline std::vector<SyntheticItem> generate_synthetic(const SyntheticSpec& spec,
                                                     std::uint64_t seed) {
  validate(spec);
  std::vector<SyntheticItem> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) out.push_back(generate_synthetic_item(spec, seed, i));
  return out;
}

// ---------------------------------------------------------------------------
// Simulated annotator: draws squiggles inside each class region of a dense
// mask, keeping every dilated stroke pixel on the stroke's class.

struct SquiggleSimulation {
  int background_strokes = 2;
  int background_vertices = 6;
  int max_ship_strokes = 8;
  int ship_vertices = 4;
  int radius = 1;
  // Background stroke loosely circling each ship at a random margin.
  bool ring_strokes = true;
  int ring_vertices = 12;
  int ring_margin_min = 2;
  int ring_margin_max = 4;
};

namespace detail {

inline bool safe_pixel(const DenseMask& m, int r, int c, int cls, int radius) {
  if (!m.classes.in_bounds(r, c) || m(r, c) != cls) return false;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc) {
      const int rr = r + dr, cc = c + dc;
      if (m.classes.in_bounds(rr, cc) && m(rr, cc) != cls) return false;
    }
  return true;
}

inline std::vector<std::vector<Pixel>> ship_components(const DenseMask& m) {
  Raster<int> label(m.height(), m.width(), 1, -1);
  std::vector<std::vector<Pixel>> comps;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      if (m(r, c) != kShip || label(r, c) >= 0) continue;
      std::vector<Pixel> comp, stack{{r, c}};
      label(r, c) = static_cast<int>(comps.size());
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        constexpr int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int rr = p.row + dr[k], cc = p.col + dc[k];
          if (m.classes.in_bounds(rr, cc) && m(rr, cc) == kShip && label(rr, cc) < 0) {
            label(rr, cc) = static_cast<int>(comps.size());
            stack.push_back({rr, cc});
          }
        }
      }
      std::sort(comp.begin(), comp.end());
      comps.push_back(std::move(comp));
    }
  return comps;
}

/// Random walk over "safe" pixels; each segment must stay safe end to end.
inline Stroke walk_stroke(const DenseMask& m, const std::vector<Pixel>& region, int cls,
                          int vertices, int max_step, int radius, Rng& rng) {
  std::vector<Pixel> safe;
  for (const auto& p : region)
    if (safe_pixel(m, p.row, p.col, cls, radius)) safe.push_back(p);
  Stroke s;
  s.cls = cls;
  if (safe.empty()) {
    // Too thin for a dilated stroke: a single undilated dot.
    s.radius = 0;
    s.polyline.push_back(region[std::uniform_int_distribution<std::size_t>(0, region.size() - 1)(rng)]);
    return s;
  }
  s.radius = radius;
  s.polyline.push_back(safe[std::uniform_int_distribution<std::size_t>(0, safe.size() - 1)(rng)]);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_int_distribution<int> step(2, std::max(2, max_step));
  for (int v = 1; v < vertices; ++v) {
    for (int attempt = 0; attempt < 24; ++attempt) {
      const double a = angle(rng);
      const int len = step(rng);
      const Pixel from = s.polyline.back();
      const Pixel to{from.row + static_cast<int>(std::lround(len * std::sin(a))),
                     from.col + static_cast<int>(std::lround(len * std::cos(a)))};
      bool ok = true;
      for (const auto& p : line_pixels(from, to))
        if (!safe_pixel(m, p.row, p.col, cls, radius)) {
          ok = false;
          break;
        }
      if (ok && !(to == from)) {
        s.polyline.push_back(to);
        break;
      }
    }
  }
  return s;
}

/// Background polyline around `comp` at Chebyshev margin `margin`; split
/// into several strokes wherever a segment would touch another region.
inline std::vector<Stroke> ring_strokes(const DenseMask& m, const std::vector<Pixel>& comp,
                                        int vertices, int margin, int radius, Rng& rng) {
  double cr = 0, cc = 0;
  for (const auto& p : comp) {
    cr += p.row;
    cc += p.col;
  }
  cr /= static_cast<double>(comp.size());
  cc /= static_cast<double>(comp.size());
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  std::vector<std::optional<Pixel>> ring;
  for (int k = 0; k < vertices; ++k) {
    const double a = phase + 2.0 * std::numbers::pi * k / vertices;
    std::optional<Pixel> hit;
    for (double t = 0.0;; t += 0.5) {
      const Pixel p{static_cast<int>(std::lround(cr + t * std::sin(a))),
                    static_cast<int>(std::lround(cc + t * std::cos(a)))};
      if (!m.classes.in_bounds(p.row, p.col)) break;
      if (safe_pixel(m, p.row, p.col, kBackground, margin)) {
        hit = p;
        break;
      }
    }
    ring.push_back(hit);
  }
  std::vector<Stroke> out;
  Stroke cur;
  cur.cls = kBackground;
  cur.radius = radius;
  auto flush = [&] {
    if (!cur.polyline.empty()) out.push_back(cur);
    cur.polyline.clear();
  };
  for (int k = 0; k <= vertices; ++k) {
    const auto& v = ring[k % vertices];
    if (!v) {
      flush();
      continue;
    }
    if (!cur.polyline.empty()) {
      bool ok = true;
      for (const auto& p : line_pixels(cur.polyline.back(), *v))
        if (!safe_pixel(m, p.row, p.col, kBackground, radius)) {
          ok = false;
          break;
        }
      if (!ok) flush();
    }
    if (cur.polyline.empty() || !(cur.polyline.back() == *v)) cur.polyline.push_back(*v);
  }
  flush();
  return out;
}

}  // namespace detail

/// Squiggles an annotator might draw on `mask`: one stroke per ship (up to
/// a limit) scaled to the ship size, background strokes around each of
/// those ships, plus long free background strokes.
inline SquiggleSet simulate_squiggles(const DenseMask& mask, const std::string& image_id,
                                      std::uint64_t seed, const SquiggleSimulation& sim = {}) {
  Rng rng(seed);
  SquiggleSet set;
  set.image_id = image_id;
  std::vector<Pixel> background;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask(r, c) == kBackground) background.push_back({r, c});
  if (background.empty()) throw MissingClassError(kBackground, "mask has no background pixels");
  auto comps = detail::ship_components(mask);
  if (comps.empty()) throw MissingClassError(kShip, "mask has no ship pixels");
  if (static_cast<int>(comps.size()) > sim.max_ship_strokes) {
    std::stable_sort(comps.begin(), comps.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });
    comps.resize(sim.max_ship_strokes);
  }
  for (const auto& comp : comps) {
    const int reach = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(comp.size())) / 2));
    set.strokes.push_back(
        detail::walk_stroke(mask, comp, kShip, sim.ship_vertices, reach, sim.radius, rng));
    if (sim.ring_strokes) {
      const int margin =
          std::uniform_int_distribution<int>(sim.ring_margin_min, sim.ring_margin_max)(rng);
      for (auto& s : detail::ring_strokes(mask, comp, sim.ring_vertices, margin, sim.radius, rng))
        set.strokes.push_back(std::move(s));
    }
  }
  const int bg_reach = std::max(4, std::min(mask.height(), mask.width()) / 6);
  for (int k = 0; k < sim.background_strokes; ++k)
    set.strokes.push_back(detail::walk_stroke(mask, background, kBackground,
                                              sim.background_vertices, bg_reach, sim.radius, rng));
  return set;
}

}  // namespace wsseg::train
