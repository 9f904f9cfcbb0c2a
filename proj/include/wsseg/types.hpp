#pragma once

#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wsseg/error.hpp"
#include "wsseg/raster.hpp"

namespace wsseg {

inline constexpr int kBackground = 0;
inline constexpr int kShip = 1;
inline constexpr int kMinImageSide = 16;

enum class Polarity { white_hot, black_hot, visible };
enum class Source { airbus_like, ir_like, synthetic };
enum class Scheme { point_n10, squiggle_n32, masked_dense };

inline std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::white_hot: return "white_hot";
    case Polarity::black_hot: return "black_hot";
    case Polarity::visible: return "visible";
  }
  return "?";
}
inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::airbus_like: return "airbus_like";
    case Source::ir_like: return "ir_like";
    case Source::synthetic: return "synthetic";
  }
  return "?";
}
inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::point_n10: return "point_n10";
    case Scheme::squiggle_n32: return "squiggle_n32";
    case Scheme::masked_dense: return "masked_dense";
  }
  return "?";
}

inline std::optional<Polarity> parse_polarity(std::string_view s) {
  if (s == "white_hot") return Polarity::white_hot;
  if (s == "black_hot") return Polarity::black_hot;
  if (s == "visible") return Polarity::visible;
  return std::nullopt;
}
inline std::optional<Source> parse_source(std::string_view s) {
  if (s == "airbus_like") return Source::airbus_like;
  if (s == "ir_like") return Source::ir_like;
  if (s == "synthetic") return Source::synthetic;
  return std::nullopt;
}
inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "point_n10") return Scheme::point_n10;
  if (s == "squiggle_n32") return Scheme::squiggle_n32;
  if (s == "masked_dense") return Scheme::masked_dense;
  return std::nullopt;
}

/// A raster with intensities in [0,1]; one channel for IR, three for visible.
struct ImageSample {
  std::string id;
  Raster<float> pixels;
  Polarity polarity = Polarity::white_hot;
  Source source = Source::synthetic;

  int height() const noexcept { return pixels.height(); }
  int width() const noexcept { return pixels.width(); }
  int channels() const noexcept { return pixels.channels(); }
};

inline void validate(const ImageSample& image) {
  if (image.id.empty()) throw ValueError("image id must be non-empty");
  if (image.height() < kMinImageSide || image.width() < kMinImageSide)
    throw ShapeError("image " + image.id + " is smaller than 16x16");
  if (image.channels() != 1 && image.channels() != 3)
    throw ShapeError("image " + image.id + " must have 1 or 3 channels");
  for (float v : image.pixels.data())
    if (!(v >= 0.0f && v <= 1.0f))
      throw ValueError("image " + image.id + " has an intensity outside [0,1]");
}

/// Per-pixel class raster; 0 = background, 1 = ship.
struct DenseMask {
  Raster<std::uint8_t> classes;

  DenseMask() = default;
  DenseMask(int height, int width, std::uint8_t fill = kBackground)
      : classes(height, width, 1, fill) {}
  explicit DenseMask(Raster<std::uint8_t> r) : classes(std::move(r)) {}

  int height() const noexcept { return classes.height(); }
  int width() const noexcept { return classes.width(); }
  std::uint8_t operator()(int r, int c) const noexcept { return classes(r, c); }
  std::uint8_t& operator()(int r, int c) noexcept { return classes(r, c); }
  std::size_t count(int cls) const {
    std::size_t n = 0;
    for (auto v : classes.data()) n += (v == cls);
    return n;
  }
  friend bool operator==(const DenseMask&, const DenseMask&) = default;
};

inline void validate(const DenseMask& mask) {
  if (mask.classes.channels() != 1) throw ShapeError("dense mask must be single-channel");
  for (auto v : mask.classes.data())
    if (v > 1) throw ValueError("dense mask values must be 0 or 1");
}

struct LabeledPoint {
  int row = 0;
  int col = 0;
  int cls = 0;
  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

struct SparseLabel {
  std::vector<LabeledPoint> points;
  Scheme scheme = Scheme::point_n10;
  std::size_t count(int cls) const {
    std::size_t n = 0;
    for (const auto& p : points) n += (p.cls == cls);
    return n;
  }
  friend bool operator==(const SparseLabel&, const SparseLabel&) = default;
};

inline void validate(const SparseLabel& label, int height, int width) {
  if (label.points.empty()) throw ValueError("sparse label has no points");
  std::set<std::pair<int, int>> seen;
  for (const auto& p : label.points) {
    if (p.row < 0 || p.col < 0 || p.row >= height || p.col >= width)
      throw BoundsError("point (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                        ") outside " + std::to_string(height) + "x" + std::to_string(width));
    if (p.cls != kBackground && p.cls != kShip)
      throw ValueError("point class must be 0 or 1");
    if (!seen.emplace(p.row, p.col).second)
      throw ValueError("duplicate point (" + std::to_string(p.row) + "," +
                       std::to_string(p.col) + ")");
  }
}

/// Boolean raster selecting the pixels that enter the loss.
struct EvaluationMask {
  Raster<std::uint8_t> selected;
  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto v : selected.data()) n += (v != 0);
    return n;
  }
  friend bool operator==(const EvaluationMask&, const EvaluationMask&) = default;
};

struct Stroke {
  int cls = kShip;
  std::vector<Pixel> polyline;
  int radius = 1;
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct SquiggleSet {
  std::vector<Stroke> strokes;
  std::string image_id;
  friend bool operator==(const SquiggleSet&, const SquiggleSet&) = default;
};

/// Checks vertex bounds and radius. `require_both_classes` enforces the
/// one-stroke-per-class rule that applies before sampling.
inline void validate(const SquiggleSet& set, int height, int width,
                     bool require_both_classes = true) {
  bool has[2] = {false, false};
  for (std::size_t i = 0; i < set.strokes.size(); ++i) {
    const auto& s = set.strokes[i];
    const std::string where = "strokes/" + std::to_string(i);
    if (s.cls != kBackground && s.cls != kShip)
      throw ValidationError(where + "/class", "stroke class must be 0 or 1");
    if (s.radius < 0) throw ValidationError(where + "/radius", "stroke radius must be >= 0");
    if (s.polyline.empty())
      throw ValidationError(where + "/polyline", "stroke polyline must have a vertex");
    for (const auto& v : s.polyline)
      if (v.row < 0 || v.col < 0 || v.row >= height || v.col >= width)
        throw BoundsError("stroke vertex (" + std::to_string(v.row) + "," +
                          std::to_string(v.col) + ") out of bounds");
    has[s.cls] = true;
  }
  if (require_both_classes) {
    if (!has[kShip]) throw ValidationError("strokes", "missing ship stroke");
    if (!has[kBackground]) throw ValidationError("strokes", "missing background stroke");
  }
}

struct AnnotationRecord {
  std::string image_id;
  std::string annotator_id;
  Scheme scheme = Scheme::point_n10;
  std::variant<SparseLabel, SquiggleSet> payload;
  std::string created_at;  // RFC 3339, UTC
  std::int64_t version = 0;
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

inline bool is_rfc3339_utc(const std::string& s) {
  static const std::regex re(
      R"(^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})$)");
  return std::regex_match(s, re);
}

struct MetricsRow {
  std::string supervision;
  std::string augmentations;
  double precision = 0;
  double recall = 0;
  double jaccard = 0;
  // All-pixel micro-averaged counterparts; precision equals recall equals
  // pixel accuracy under that convention.
  double micro_precision = 0;
  double micro_recall = 0;
};

struct ImageMetrics {
  std::string image_id;
  double precision = 0;
  double recall = 0;
  double jaccard = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<ImageMetrics> per_image;
};

inline void validate(const MetricsReport& report) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (const auto& r : report.rows)
    if (!unit(r.precision) || !unit(r.recall) || !unit(r.jaccard) ||
        !unit(r.micro_precision) || !unit(r.micro_recall))
      throw ValueError("metrics must lie in [0,1]");
  for (const auto& r : report.per_image)
    if (!unit(r.precision) || !unit(r.recall) || !unit(r.jaccard))
      throw ValueError("metrics must lie in [0,1]");
}

}  // namespace wsseg
