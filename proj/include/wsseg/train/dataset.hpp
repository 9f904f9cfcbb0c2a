#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsseg/error.hpp"
#include "wsseg/png_io.hpp"
#include "wsseg/train/config.hpp"
#include "wsseg/types.hpp"

// On-disk dataset directory:
//
//   manifest.json   {"images":[{"image_id", "image", "mask", "polarity", "source"}]}
//   images/<id>.png 8- or 16-bit gray or RGB
//   masks/<id>.png  8-bit, 0 = background, 255 = ship (optional per entry)
//
// Without a manifest every images/*.png (or top-level *.png) is taken in
// file-name order, with masks/<stem>.png picked up when present.

namespace wsseg::train {

struct DatasetItem {
  ImageSample image;
  std::optional<DenseMask> mask;
};

namespace detail {

inline DatasetItem load_entry(const std::filesystem::path& root, const std::string& id,
                              const std::filesystem::path& image_rel,
                              const std::optional<std::filesystem::path>& mask_rel,
                              Polarity polarity, Source source) {
  DatasetItem item;
  item.image.id = id;
  item.image.pixels = load_image_png(root / image_rel);
  item.image.polarity = polarity;
  item.image.source = source;
  if (mask_rel) {
    item.mask = load_dense_mask_png(root / *mask_rel);
    if (!item.mask->classes.same_extent(item.image.pixels))
      throw ShapeError("mask for '" + id + "' does not match its image");
  }
  return item;
}

inline Polarity polarity_field(const std::string& s) {
  if (auto p = parse_polarity(s)) return *p;
  throw FormatError("unknown polarity '" + s + "'");
}

inline Source source_field(const std::string& s) {
  if (auto p = parse_source(s)) return *p;
  throw FormatError("unknown source '" + s + "'");
}

}  // namespace detail

inline std::vector<DatasetItem> load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  std::vector<DatasetItem> items;
  const fs::path manifest = root / "manifest.json";
  if (fs::exists(manifest)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(manifest));
      for (const auto& e : j.at("images")) {
        std::optional<fs::path> mask;
        if (e.contains("mask") && !e.at("mask").is_null()) mask = e.at("mask").get<std::string>();
        items.push_back(detail::load_entry(
            root, e.at("image_id").get<std::string>(), e.at("image").get<std::string>(), mask,
            detail::polarity_field(e.value("polarity", std::string("white_hot"))),
            detail::source_field(e.value("source", std::string("ir_like")))));
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad manifest " + manifest.string() + ": " + e.what());
    }
    return items;
  }
  const fs::path dir = fs::is_directory(root / "images") ? root / "images" : root;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::optional<fs::path> mask;
    const fs::path m = root / "masks" / f.filename();
    if (fs::exists(m)) mask = fs::relative(m, root);
    items.push_back(detail::load_entry(root, f.stem().string(), fs::relative(f, root), mask,
                                       Polarity::white_hot, Source::ir_like));
  }
  return items;
}

/// Writes images as 16-bit PNGs and masks as 8-bit PNGs plus a manifest.
inline void save_dataset(const std::filesystem::path& root, const std::vector<DatasetItem>& items) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& item : items) {
    const std::string img = "images/" + item.image.id + ".png";
    save_image_png(item.image.pixels, root / img);
    nlohmann::json e = {{"image_id", item.image.id},
                        {"image", img},
                        {"polarity", std::string(to_string(item.image.polarity))},
                        {"source", std::string(to_string(item.image.source))}};
    if (item.mask) {
      const std::string m = "masks/" + item.image.id + ".png";
      save_dense_mask_png(*item.mask, root / m);
      e["mask"] = m;
    }
    entries.push_back(std::move(e));
  }
  wsseg::detail::write_file_bytes(root / "manifest.json",
                           [&] {
                             const std::string s = nlohmann::json{{"images", entries}}.dump(1);
                             return std::vector<unsigned char>(s.begin(), s.end());
                           }());
}

}  // namespace wsseg::train
