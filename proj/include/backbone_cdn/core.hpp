#pragma once

// Shared identifiers and error types used by every component.

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace backbone_cdn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document or line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class UnknownNode : public Error {
 public:
  using Error::Error;
};

/// Identifier of a deployment node; matches `[A-Za-z0-9_.-]+`.
class NodeId {
 public:
  NodeId() = default;
  explicit NodeId(std::string value);

  static bool is_valid(std::string_view value);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
  friend bool operator==(const NodeId&, const NodeId&) = default;

 private:
  std::string value_;
};

/// Absolute namespaced file path. The namespace is the first component.
class FileId {
 public:
  FileId() = default;
  explicit FileId(std::string path);

  static bool is_valid(std::string_view path);

  const std::string& path() const { return path_; }
  std::string_view ns() const { return std::string_view(path_).substr(1, ns_len_); }

  friend auto operator<=>(const FileId& a, const FileId& b) { return a.path_ <=> b.path_; }
  friend bool operator==(const FileId& a, const FileId& b) { return a.path_ == b.path_; }

 private:
  std::string path_;
  std::size_t ns_len_ = 0;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  /// Throws ValidationError unless lat in [-90, 90] and lon in (-180, 180].
  static GeoPoint make(double lat, double lon);

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// A file as exported by an origin. `version` is derived from the generated
/// content and never set directly.
struct FileMeta {
  FileId id;
  std::uint64_t size = 0;
  std::uint64_t version = 0;
  std::uint64_t gen_seed = 0;

  static FileMeta make(FileId id, std::uint64_t size, std::uint64_t gen_seed);

  friend bool operator==(const FileMeta&, const FileMeta&) = default;
};

/// 16 lowercase hex digits.
std::string version_hex(std::uint64_t version);

}  // namespace backbone_cdn

template <>
struct std::hash<backbone_cdn::NodeId> {
  std::size_t operator()(const backbone_cdn::NodeId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

template <>
struct std::hash<backbone_cdn::FileId> {
  std::size_t operator()(const backbone_cdn::FileId& id) const noexcept {
    return std::hash<std::string>{}(id.path());
  }
};
