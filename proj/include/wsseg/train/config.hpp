#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "wsseg/augment.hpp"
#include "wsseg/error.hpp"
#include "wsseg/nn/unet.hpp"
#include "wsseg/types.hpp"

// Flat "key = value" configuration files. Dotted keys address nested
// sections ("model.depth"); '#' starts a comment line; unknown keys are
// errors.

namespace wsseg::train {

enum class Supervision { dense, point_n10, squiggle_n32, masked_dense };

inline std::string_view to_string(Supervision s) {
  switch (s) {
    case Supervision::dense: return "dense";
    case Supervision::point_n10: return "point_n10";
    case Supervision::squiggle_n32: return "squiggle_n32";
    case Supervision::masked_dense: return "masked_dense";
  }
  return "?";
}

struct TrainConfig {
  int epochs = 40;
  int batch_size = 4;
  double learning_rate = 1e-3;
  double split_ratio = 0.9;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  nn::ModelConfig model;
  std::optional<std::filesystem::path> pretrain_checkpoint;
  Supervision supervision = Supervision::squiggle_n32;
  double mask_fraction = 0.90;  // masked_dense only
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0))
    throw ConfigError("split_ratio must lie in (0,1)");
  if (!(cfg.mask_fraction >= 0.0 && cfg.mask_fraction < 1.0))
    throw ConfigError("mask_fraction must lie in [0,1)");
  validate(cfg.augment);
  nn::validate(cfg.model);
}

/// Key/value pairs in file order; duplicate keys are rejected.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

namespace detail {

inline long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError("'" + key + "' expects an unsigned integer, got '" + v + "'");
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace detail

inline TrainConfig parse_train_config(std::string_view text) {
  using namespace detail;
  TrainConfig cfg;
  std::optional<int> crop_h, crop_w;
  for (const auto& [k, v] : parse_key_values(text)) {
    if (k == "epochs") cfg.epochs = static_cast<int>(to_int(k, v));
    else if (k == "batch_size") cfg.batch_size = static_cast<int>(to_int(k, v));
    else if (k == "learning_rate") cfg.learning_rate = to_double(k, v);
    else if (k == "split_ratio") cfg.split_ratio = to_double(k, v);
    else if (k == "seed") cfg.seed = to_u64(k, v);
    else if (k == "mask_fraction") cfg.mask_fraction = to_double(k, v);
    else if (k == "pretrain_checkpoint") {
      if (!v.empty()) cfg.pretrain_checkpoint = v;
    } else if (k == "supervision") {
      if (v == "dense") cfg.supervision = Supervision::dense;
      else if (v == "point_n10") cfg.supervision = Supervision::point_n10;
      else if (v == "squiggle_n32") cfg.supervision = Supervision::squiggle_n32;
      else if (v == "masked_dense") cfg.supervision = Supervision::masked_dense;
      else if (v.starts_with("masked_dense(") && v.ends_with(")")) {
        cfg.supervision = Supervision::masked_dense;
        cfg.mask_fraction = to_double(k, v.substr(13, v.size() - 14));
      } else {
        throw ConfigError("unknown supervision '" + v + "'");
      }
    } else if (k == "augment.rotation_degrees_max") cfg.augment.rotation_degrees_max = to_double(k, v);
    else if (k == "augment.scale_min") cfg.augment.scale_range[0] = to_double(k, v);
    else if (k == "augment.scale_max") cfg.augment.scale_range[1] = to_double(k, v);
    else if (k == "augment.crop_height") crop_h = static_cast<int>(to_int(k, v));
    else if (k == "augment.crop_width") crop_w = static_cast<int>(to_int(k, v));
    else if (k == "augment.enable_grayscale") cfg.augment.enable_grayscale = to_bool(k, v);
    else if (k == "augment.invert_probability") cfg.augment.invert_probability = to_double(k, v);
    else if (k == "augment.flip_probability") cfg.augment.flip_probability = to_double(k, v);
    else if (k == "augment.geometric") cfg.augment.geometric = to_bool(k, v);
    else if (k == "augment.seed") cfg.augment.seed = to_u64(k, v);
    else if (k == "model.depth") cfg.model.depth = static_cast<int>(to_int(k, v));
    else if (k == "model.base_channels") cfg.model.base_channels = static_cast<int>(to_int(k, v));
    else if (k == "model.in_channels") cfg.model.in_channels = static_cast<int>(to_int(k, v));
    else if (k == "model.out_classes") cfg.model.out_classes = static_cast<int>(to_int(k, v));
    else if (k == "model.upsample") {
      if (v == "bilinear") cfg.model.upsample = nn::Upsample::bilinear;
      else if (v == "transposed") cfg.model.upsample = nn::Upsample::transposed;
      else throw ConfigError("unknown model.upsample '" + v + "'");
    } else {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  if (crop_h.has_value() != crop_w.has_value())
    throw ConfigError("augment.crop_height and augment.crop_width must be given together");
  if (crop_h) cfg.augment.crop_size = std::make_pair(*crop_h, *crop_w);
  validate(cfg);
  return cfg;
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(read_text_file(path));
}

}  // namespace wsseg::train
