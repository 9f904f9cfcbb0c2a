#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "wsseg/annotation_json.hpp"
#include "wsseg/error.hpp"
#include "wsseg/sampling.hpp"
#include "wsseg/train/dataset.hpp"
#include "wsseg/types.hpp"

// Annotation bookkeeping. Every accepted record is appended, one canonical
// JSON document per line, to a log file; all state is rebuilt from that
// log on start-up.

namespace wsseg::service {

enum class ImageStatus { unlabeled, point_done, squiggle_done };

inline std::string_view to_string(ImageStatus s) {
  switch (s) {
    case ImageStatus::unlabeled: return "unlabeled";
    case ImageStatus::point_done: return "point_done";
    case ImageStatus::squiggle_done: return "squiggle_done";
  }
  return "?";
}

inline std::optional<ImageStatus> parse_status(std::string_view s) {
  if (s == "unlabeled") return ImageStatus::unlabeled;
  if (s == "point_done") return ImageStatus::point_done;
  if (s == "squiggle_done") return ImageStatus::squiggle_done;
  return std::nullopt;
}

struct ImageInfo {
  std::string image_id;
  ImageStatus status = ImageStatus::unlabeled;
  int height = 0;
  int width = 0;
};

struct Progress {
  std::size_t total = 0;
  std::size_t point_done = 0;
  std::size_t squiggle_done = 0;
};

struct SubmitResult {
  bool accepted = false;
  std::int64_t version = 0;
};

/// Annotator-facing rules on top of the record schema: exactly 5 points per
/// class for point_n10, at least one stroke per class for squiggle_n32, and
/// everything inside the image.
inline void validate_submission(const AnnotationRecord& r, int height, int width) {
  if (const auto* label = std::get_if<SparseLabel>(&r.payload)) {
    for (std::size_t i = 0; i < label->points.size(); ++i) {
      const auto& p = label->points[i];
      if (p.row >= height || p.col >= width)
        throw ValidationError("points/" + std::to_string(i),
                              "point (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                                  ") outside " + std::to_string(height) + "x" +
                                  std::to_string(width));
    }
    for (int cls : {kBackground, kShip}) {
      const auto n = label->count(cls);
      if (n != 5)
        throw ValidationError("points", "points: class " + std::to_string(cls) + " count " +
                                            std::to_string(n) + ", expected 5");
    }
    return;
  }
  const auto& set = std::get<SquiggleSet>(r.payload);
  for (std::size_t i = 0; i < set.strokes.size(); ++i)
    for (std::size_t k = 0; k < set.strokes[i].polyline.size(); ++k) {
      const auto& v = set.strokes[i].polyline[k];
      if (v.row >= height || v.col >= width)
        throw ValidationError("strokes/" + std::to_string(i) + "/polyline/" + std::to_string(k),
                              "stroke vertex outside the image");
    }
  validate(set, height, width, /*require_both_classes=*/true);
}

class AnnotationService {
 public:
  /// Images are listed in the given order. An empty `log_path` keeps the
  /// log in memory only.
  AnnotationService(std::vector<ImageSample> images, std::filesystem::path log_path)
      : images_(std::move(images)), log_path_(std::move(log_path)) {
    for (std::size_t i = 0; i < images_.size(); ++i)
      if (!index_.emplace(images_[i].id, i).second)
        throw ValueError("duplicate image id '" + images_[i].id + "'");
    replay();
  }

  static AnnotationService from_directory(const std::filesystem::path& images_dir,
                                          const std::filesystem::path& log_path) {
    std::vector<ImageSample> images;
    for (auto& item : train::load_dataset(images_dir)) images.push_back(std::move(item.image));
    return AnnotationService(std::move(images), log_path);
  }

  AnnotationService(AnnotationService&& o) noexcept
      : images_(std::move(o.images_)),
        index_(std::move(o.index_)),
        log_path_(std::move(o.log_path_)),
        records_(std::move(o.records_)),
        max_version_(std::move(o.max_version_)),
        seen_(std::move(o.seen_)),
        latest_scheme_(std::move(o.latest_scheme_)) {}

  std::vector<ImageInfo> list_images(std::optional<ImageStatus> filter = std::nullopt) const {
    std::shared_lock lock(mu_);
    std::vector<ImageInfo> out;
    for (const auto& img : images_) {
      const ImageInfo info{img.id, status_locked(img.id), img.height(), img.width()};
      if (!filter || info.status == *filter) out.push_back(info);
    }
    return out;
  }

  Progress progress() const {
    std::shared_lock lock(mu_);
    Progress p;
    p.total = images_.size();
    for (const auto& img : images_) {
      const auto s = status_locked(img.id);
      p.point_done += s == ImageStatus::point_done;
      p.squiggle_done += s == ImageStatus::squiggle_done;
    }
    return p;
  }

  const ImageSample& image(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw UnknownImageError("unknown image '" + id + "'");
    return images_[it->second];
  }

  /// Validates and appends `record`; its `version` field is ignored and
  /// replaced by the next version for (image_id, annotator_id). Re-sending
  /// an identical record returns the version it was first stored under.
  SubmitResult submit(AnnotationRecord record) {
    const ImageSample& img = image(record.image_id);
    check_record(record);
    validate_submission(record, img.height(), img.width());
    if (auto* set = std::get_if<SquiggleSet>(&record.payload)) set->image_id = record.image_id;

    std::unique_lock lock(mu_);
    const std::string key = idempotency_key(record);
    if (const auto it = seen_.find(key); it != seen_.end()) return {true, it->second};
    record.version = max_version_[{record.image_id, record.annotator_id}] + 1;
    const std::string line = serialize_annotation(record);
    if (!log_path_.empty()) {
      std::ofstream out(log_path_, std::ios::binary | std::ios::app);
      out << line << '\n';
      out.flush();
      if (!out) throw IoError("cannot append to " + log_path_.string());
    }
    admit(std::move(record), key);
    return {true, records_.back().version};
  }

  /// Latest record per image (log order, any annotator) for `scheme`.
  /// Point records are exported as drawn; squiggles are rasterized and
  /// subsampled to `n` points with seed `derive_seed(seed, image index)`.
  ExportDocument export_dataset(Scheme scheme, int n, std::uint64_t seed) const {
    if (scheme == Scheme::masked_dense) throw ValueError("masked_dense cannot be exported");
    std::shared_lock lock(mu_);
    std::map<std::string, const AnnotationRecord*> latest;
    for (const auto& r : records_)
      if (r.scheme == scheme) latest[r.image_id] = &r;
    std::vector<std::string> missing;
    for (const auto& img : images_)
      if (!latest.count(img.id)) missing.push_back(img.id);
    if (!missing.empty()) throw IncompleteError(std::move(missing));
    ExportDocument doc;
    for (std::size_t i = 0; i < images_.size(); ++i) {
      const auto& img = images_[i];
      const AnnotationRecord& r = *latest.at(img.id);
      ExportEntry e{img.id, {}};
      if (scheme == Scheme::point_n10) {
        e.points = std::get<SparseLabel>(r.payload).points;
      } else {
        e.points = sample_from_squiggles(std::get<SquiggleSet>(r.payload), n, img.height(),
                                         img.width(), derive_seed(seed, i))
                       .points;
      }
      doc.images.push_back(std::move(e));
    }
    return doc;
  }

  std::vector<AnnotationRecord> records() const {
    std::shared_lock lock(mu_);
    return records_;
  }

 private:
  static std::string idempotency_key(AnnotationRecord r) {
    r.version = 0;
    return serialize_annotation(r);
  }

  void admit(AnnotationRecord record, const std::string& key) {
    auto& v = max_version_[{record.image_id, record.annotator_id}];
    v = std::max(v, record.version);
    seen_.emplace(key, record.version);
    latest_scheme_[record.image_id] = record.scheme;
    records_.push_back(std::move(record));
  }

  void replay() {
    if (log_path_.empty() || !std::filesystem::exists(log_path_)) return;
    std::ifstream in(log_path_, std::ios::binary);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      AnnotationRecord r;
      try {
        r = deserialize_annotation(line);
      } catch (const SchemaError& e) {
        throw FormatError(log_path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      if (!index_.count(r.image_id))
        throw FormatError(log_path_.string() + ":" + std::to_string(lineno) +
                          ": unknown image '" + r.image_id + "'");
      const std::string key = idempotency_key(r);
      admit(std::move(r), key);
    }
  }

  ImageStatus status_locked(const std::string& id) const {
    const auto it = latest_scheme_.find(id);
    if (it == latest_scheme_.end()) return ImageStatus::unlabeled;
    return it->second == Scheme::point_n10 ? ImageStatus::point_done : ImageStatus::squiggle_done;
  }

  std::vector<ImageSample> images_;
  std::map<std::string, std::size_t> index_;
  std::filesystem::path log_path_;
  mutable std::shared_mutex mu_;
  std::vector<AnnotationRecord> records_;
  std::map<std::pair<std::string, std::string>, std::int64_t> max_version_;
  std::map<std::string, std::int64_t> seen_;
  std::map<std::string, Scheme> latest_scheme_;
};

}  // namespace wsseg::service
