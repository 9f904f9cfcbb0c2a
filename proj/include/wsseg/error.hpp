#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wsseg {

/// Base of every error raised by the library. `kind()` is a stable short tag
/// used by the CLI and the HTTP layer.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define WSSEG_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  };

WSSEG_DEFINE_ERROR(ParseError)
WSSEG_DEFINE_ERROR(OverlapError)
WSSEG_DEFINE_ERROR(BoundsError)
WSSEG_DEFINE_ERROR(FormatError)
WSSEG_DEFINE_ERROR(ValueError)
WSSEG_DEFINE_ERROR(ShapeError)
WSSEG_DEFINE_ERROR(DegenerateError)
WSSEG_DEFINE_ERROR(EmptyMaskError)
WSSEG_DEFINE_ERROR(LengthMismatchError)
WSSEG_DEFINE_ERROR(ConfigError)
WSSEG_DEFINE_ERROR(VersionError)
WSSEG_DEFINE_ERROR(ShapeTableError)
WSSEG_DEFINE_ERROR(TooFewItemsError)
WSSEG_DEFINE_ERROR(ConfigMismatchError)
WSSEG_DEFINE_ERROR(SpecError)
WSSEG_DEFINE_ERROR(UnknownImageError)
WSSEG_DEFINE_ERROR(EmptyEpochError)
WSSEG_DEFINE_ERROR(IoError)

#undef WSSEG_DEFINE_ERROR

/// Raised when a class has too few pixels for the requested draw. `class_id`
/// names the offending class (0 background, 1 ship).
class InsufficientClassError : public Error {
 public:
  InsufficientClassError(int class_id, const std::string& what)
      : Error("InsufficientClassError", what), class_id_(class_id) {}
  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

class MissingClassError : public Error {
 public:
  MissingClassError(int class_id, const std::string& what)
      : Error("MissingClassError", what), class_id_(class_id) {}
  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

/// Structural JSON problem; `path()` is a JSON pointer ("/points/3/2").
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error("SchemaError", what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Semantic rejection of an annotation; `path()` names the field ("points").
class ValidationError : public Error {
 public:
  ValidationError(std::string path, const std::string& what)
      : Error("ValidationError", what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IncompleteError : public Error {
 public:
  explicit IncompleteError(std::vector<std::string> missing)
      : Error("IncompleteError", describe(missing)), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing_ids() const noexcept { return missing_; }

 private:
  static std::string describe(const std::vector<std::string>& ids) {
    std::string s = "images without an annotation of the requested scheme:";
    for (const auto& id : ids) s += " " + id;
    return s;
  }
  std::vector<std::string> missing_;
};

}  // namespace wsseg
