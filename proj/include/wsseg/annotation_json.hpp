#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wsseg/error.hpp"
#include "wsseg/types.hpp"

namespace wsseg {

using Json = nlohmann::json;

// Canonical annotation JSON: keys sorted (nlohmann's default object map),
// compact separators, integer coordinates.
//
//   {"annotator_id":str,"created_at":RFC3339,"image_id":str,
//    "points":[[row,col,class],...]            (point_n10)
//    "strokes":[{"class":c,"polyline":[[r,c],...],"radius":n},...]  (squiggle_n32)
//    "scheme":"point_n10"|"squiggle_n32","version":int}

namespace detail {

inline const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "/" + key, "missing required field '" + key + "'");
  return *it;
}

inline std::string require_string(const Json& obj, const std::string& key,
                                  const std::string& path) {
  const Json& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(path + "/" + key, "'" + key + "' must be a string");
  return v.get<std::string>();
}

inline std::int64_t require_int(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
  return v.get<std::int64_t>();
}

inline void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) throw SchemaError(path + "/" + it.key(), "unexpected field '" + it.key() + "'");
  }
}

inline Json points_to_json(const std::vector<LabeledPoint>& pts) {
  Json arr = Json::array();
  for (const auto& p : pts) arr.push_back(Json::array({p.row, p.col, p.cls}));
  return arr;
}

inline std::vector<LabeledPoint> points_from_json(const Json& arr, const std::string& path) {
  if (!arr.is_array()) throw SchemaError(path, "points must be an array");
  std::vector<LabeledPoint> out;
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    const Json& e = arr[i];
    if (!e.is_array() || e.size() != 3) throw SchemaError(p, "point must be [row,col,class]");
    const auto row = require_int(e[0], p + "/0");
    const auto col = require_int(e[1], p + "/1");
    const auto cls = require_int(e[2], p + "/2");
    if (row < 0 || row > INT32_MAX) throw SchemaError(p + "/0", "row out of range");
    if (col < 0 || col > INT32_MAX) throw SchemaError(p + "/1", "col out of range");
    if (cls != kBackground && cls != kShip) throw SchemaError(p + "/2", "class must be 0 or 1");
    if (!seen.emplace(static_cast<int>(row), static_cast<int>(col)).second)
      throw SchemaError(p, "duplicate coordinate");
    out.push_back({static_cast<int>(row), static_cast<int>(col), static_cast<int>(cls)});
  }
  if (out.empty()) throw SchemaError(path, "points must be non-empty");
  return out;
}

inline Json stroke_to_json(const Stroke& s) {
  Json poly = Json::array();
  for (const auto& v : s.polyline) poly.push_back(Json::array({v.row, v.col}));
  return Json{{"class", s.cls}, {"polyline", std::move(poly)}, {"radius", s.radius}};
}

inline Stroke stroke_from_json(const Json& obj, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "stroke must be an object");
  reject_unknown_keys(obj, {"class", "polyline", "radius"}, path);
  Stroke s;
  const auto cls = require_int(require(obj, "class", path), path + "/class");
  if (cls != kBackground && cls != kShip) throw SchemaError(path + "/class", "class must be 0 or 1");
  s.cls = static_cast<int>(cls);
  const auto radius = require_int(require(obj, "radius", path), path + "/radius");
  if (radius < 0 || radius > 1024) throw SchemaError(path + "/radius", "radius out of range");
  s.radius = static_cast<int>(radius);
  const Json& poly = require(obj, "polyline", path);
  if (!poly.is_array() || poly.empty())
    throw SchemaError(path + "/polyline", "polyline must be a non-empty array");
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const std::string p = path + "/polyline/" + std::to_string(i);
    if (!poly[i].is_array() || poly[i].size() != 2) throw SchemaError(p, "vertex must be [row,col]");
    const auto r = require_int(poly[i][0], p + "/0");
    const auto c = require_int(poly[i][1], p + "/1");
    if (r < 0 || r > INT32_MAX) throw SchemaError(p + "/0", "row out of range");
    if (c < 0 || c > INT32_MAX) throw SchemaError(p + "/1", "col out of range");
    s.polyline.push_back({static_cast<int>(r), static_cast<int>(c)});
  }
  return s;
}

}  // namespace detail

inline Json annotation_to_json(const AnnotationRecord& record) {
  Json j{{"image_id", record.image_id},
         {"annotator_id", record.annotator_id},
         {"scheme", std::string(to_string(record.scheme))},
         {"version", record.version},
         {"created_at", record.created_at}};
  if (const auto* label = std::get_if<SparseLabel>(&record.payload)) {
    j["points"] = detail::points_to_json(label->points);
  } else {
    Json strokes = Json::array();
    for (const auto& s : std::get<SquiggleSet>(record.payload).strokes)
      strokes.push_back(detail::stroke_to_json(s));
    j["strokes"] = std::move(strokes);
  }
  return j;
}

inline void check_record(const AnnotationRecord& record) {
  if (record.image_id.empty()) throw SchemaError("/image_id", "image_id must be non-empty");
  if (record.annotator_id.empty())
    throw SchemaError("/annotator_id", "annotator_id must be non-empty");
  if (record.version < 0) throw SchemaError("/version", "version must be >= 0");
  if (!is_rfc3339_utc(record.created_at))
    throw SchemaError("/created_at", "created_at must be an RFC 3339 timestamp");
  const bool is_points = std::holds_alternative<SparseLabel>(record.payload);
  if (record.scheme == Scheme::point_n10 && !is_points)
    throw SchemaError("/scheme", "point_n10 record must carry points");
  if (record.scheme == Scheme::squiggle_n32 && is_points)
    throw SchemaError("/scheme", "squiggle_n32 record must carry strokes");
  if (record.scheme == Scheme::masked_dense)
    throw SchemaError("/scheme", "masked_dense is not an annotation scheme");
}

inline AnnotationRecord annotation_from_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("", "annotation must be a JSON object");
  AnnotationRecord r;
  r.image_id = detail::require_string(j, "image_id", "");
  r.annotator_id = detail::require_string(j, "annotator_id", "");
  const std::string scheme = detail::require_string(j, "scheme", "");
  const auto parsed = parse_scheme(scheme);
  if (!parsed || *parsed == Scheme::masked_dense)
    throw SchemaError("/scheme", "scheme must be point_n10 or squiggle_n32");
  r.scheme = *parsed;
  r.version = detail::require_int(detail::require(j, "version", ""), "/version");
  r.created_at = detail::require_string(j, "created_at", "");
  if (r.scheme == Scheme::point_n10) {
    detail::reject_unknown_keys(
        j, {"image_id", "annotator_id", "scheme", "version", "created_at", "points"}, "");
    SparseLabel label;
    label.scheme = Scheme::point_n10;
    label.points = detail::points_from_json(detail::require(j, "points", ""), "/points");
    r.payload = std::move(label);
  } else {
    detail::reject_unknown_keys(
        j, {"image_id", "annotator_id", "scheme", "version", "created_at", "strokes"}, "");
    const Json& arr = detail::require(j, "strokes", "");
    if (!arr.is_array() || arr.empty())
      throw SchemaError("/strokes", "strokes must be a non-empty array");
    SquiggleSet set;
    set.image_id = r.image_id;
    for (std::size_t i = 0; i < arr.size(); ++i)
      set.strokes.push_back(detail::stroke_from_json(arr[i], "/strokes/" + std::to_string(i)));
    r.payload = std::move(set);
  }
  check_record(r);
  return r;
}

inline std::string serialize_annotation(const AnnotationRecord& record) {
  check_record(record);
  return annotation_to_json(record).dump();
}

inline AnnotationRecord deserialize_annotation(std::string_view bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  return annotation_from_json(j);
}

// Sparse-label export: {"images":[{"image_id":..., "points":[[r,c,cls],...]}]}

struct ExportEntry {
  std::string image_id;
  std::vector<LabeledPoint> points;
  friend bool operator==(const ExportEntry&, const ExportEntry&) = default;
};

struct ExportDocument {
  std::vector<ExportEntry> images;
  friend bool operator==(const ExportDocument&, const ExportDocument&) = default;
};

inline std::string serialize_export(const ExportDocument& doc) {
  Json images = Json::array();
  for (const auto& e : doc.images)
    images.push_back(Json{{"image_id", e.image_id}, {"points", detail::points_to_json(e.points)}});
  return Json{{"images", std::move(images)}}.dump();
}

inline ExportDocument deserialize_export(std::string_view bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("", "export must be a JSON object");
  detail::reject_unknown_keys(j, {"images"}, "");
  const Json& arr = detail::require(j, "images", "");
  if (!arr.is_array()) throw SchemaError("/images", "images must be an array");
  ExportDocument doc;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = "/images/" + std::to_string(i);
    if (!arr[i].is_object()) throw SchemaError(p, "entry must be an object");
    detail::reject_unknown_keys(arr[i], {"image_id", "points"}, p);
    ExportEntry e;
    e.image_id = detail::require_string(arr[i], "image_id", p);
    if (!ids.insert(e.image_id).second) throw SchemaError(p + "/image_id", "duplicate image_id");
    e.points = detail::points_from_json(detail::require(arr[i], "points", p), p + "/points");
    doc.images.push_back(std::move(e));
  }
  return doc;
}

}  // namespace wsseg
