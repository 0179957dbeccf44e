#include "backbone_cdn/core.hpp"

#include <cstdio>

#include "backbone_cdn/content.hpp"

namespace backbone_cdn {

NodeId::NodeId(std::string value) : value_(std::move(value)) {
  if (!is_valid(value_)) {
    throw ValidationError("invalid node id '" + value_ + "'");
  }
}

bool NodeId::is_valid(std::string_view value) {
  // "-" marks a failed access in logs.
  if (value.empty() || value == "-") return false;
  for (char c : value) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

FileId::FileId(std::string path) : path_(std::move(path)) {
  if (!is_valid(path_)) {
    throw ValidationError("invalid file path '" + path_ + "'");
  }
  ns_len_ = path_.find('/', 1) - 1;
}

bool FileId::is_valid(std::string_view path) {
  if (path.size() < 2 || path.front() != '/') return false;
  std::size_t components = 0;
  std::size_t pos = 1;
  while (pos <= path.size()) {
    std::size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    const std::string_view comp = path.substr(pos, next - pos);
    if (comp.empty() || comp == "." || comp == "..") return false;
    for (char c : comp) {
      // Whitespace and control bytes would break the line-oriented formats.
      if (static_cast<unsigned char>(c) <= 0x20 || c == 0x7f) return false;
    }
    ++components;
    pos = next + 1;
  }
  return components >= 2;
}

GeoPoint GeoPoint::make(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0)) {
    throw ValidationError("lat " + std::to_string(lat) + " outside [-90, 90]");
  }
  if (!(lon > -180.0 && lon <= 180.0)) {
    throw ValidationError("lon " + std::to_string(lon) + " outside (-180, 180]");
  }
  return GeoPoint{lat, lon};
}

FileMeta FileMeta::make(FileId id, std::uint64_t size, std::uint64_t gen_seed) {
  FileMeta meta;
  meta.id = std::move(id);
  meta.size = size;
  meta.gen_seed = gen_seed;
  meta.version = content_version(gen_seed, size);
  return meta;
}

std::string version_hex(std::uint64_t version) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(version));
  return buf;
}

}  // namespace backbone_cdn
