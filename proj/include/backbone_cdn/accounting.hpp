#pragma once

// Access accounting: per-namespace working set, data read, data reuse
// factor and byte hit ratio over a half-open time window.
//
// The working set is the sum of the full sizes of the distinct files with at
// least one successful access in the window, however little of each was read.
// The data reuse factor is data read divided by working set: how many times
// the working set was read in the window.

#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "backbone_cdn/core.hpp"

namespace backbone_cdn {

class InvalidRecord : public Error {
 public:
  using Error::Error;
};

class UndefinedRatio : public Error {
 public:
  using Error::Error;
};

struct AccessRecord {
  std::int64_t t_ms = 0;
  NodeId client;
  std::optional<NodeId> cache;  // empty: every cache attempt failed
  FileId file;
  std::uint64_t file_size = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_from_cache = 0;
  std::uint64_t bytes_from_origin = 0;

  bool failed() const { return !cache.has_value(); }
  /// Throws InvalidRecord naming the offending field.
  void validate() const;

  friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

/// Half-open [from_ms, to_ms).
struct TimeWindow {
  std::int64_t from_ms = std::numeric_limits<std::int64_t>::min();
  std::int64_t to_ms = std::numeric_limits<std::int64_t>::max();

  bool contains(std::int64_t t) const { return t >= from_ms && t < to_ms; }
};

/// Exact quotient kept as integers; converted to floating point only for display.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  bool defined() const { return den != 0; }
  double value() const;
};

struct NamespaceReport {
  std::string ns;
  std::uint64_t working_set_bytes = 0;
  std::uint64_t data_read_bytes = 0;
  std::uint64_t hits_bytes = 0;
  std::uint64_t misses_bytes = 0;
  std::uint64_t origin_bytes = 0;

  Ratio reuse_factor() const { return {data_read_bytes, working_set_bytes}; }
  Ratio hit_ratio() const { return {hits_bytes, data_read_bytes}; }

  friend bool operator==(const NamespaceReport&, const NamespaceReport&) = default;
};

/// Per-namespace aggregation, sorted by namespace. Failed records are ignored.
/// OpenMP-parallel over records.
std::vector<NamespaceReport> aggregate(std::span<const AccessRecord> records, TimeWindow window = {});

/// Single-threaded reference for aggregate.
std::vector<NamespaceReport> aggregate_serial(std::span<const AccessRecord> records, TimeWindow window = {});

/// Append-only access log; appends are serialized, queries see a snapshot.
class AccessLog {
 public:
  void record(AccessRecord r);
  std::vector<AccessRecord> snapshot() const;
  std::size_t size() const;

  std::uint64_t working_set(std::string_view ns, TimeWindow window = {}) const;
  std::uint64_t data_read(std::string_view ns, TimeWindow window = {}) const;
  /// Throws UndefinedRatio when the working set is empty.
  double reuse_factor(std::string_view ns, TimeWindow window = {}) const;
  std::vector<NamespaceReport> report(TimeWindow window = {}) const;

 private:
  std::optional<NamespaceReport> one(std::string_view ns, TimeWindow window) const;

  mutable std::mutex mu_;
  std::vector<AccessRecord> records_;
};

/// Nearest integer when >= 10, otherwise one decimal.
std::string render_ratio(double value);

/// JSON array of report objects; ratios with 6 significant digits.
std::string render_report_json(const std::vector<NamespaceReport>& reports);

/// Human-readable table in terabytes.
std::string render_report_table(const std::vector<NamespaceReport>& reports);

/// TSV: t_ms, client, cache ("-" when failed), path, file_size, bytes_read,
/// bytes_from_cache, bytes_from_origin.
std::string format_access_record(const AccessRecord& r);
std::string format_access_log(std::span<const AccessRecord> records);
/// Throws ParseError naming the 1-based line number.
std::vector<AccessRecord> parse_access_log(std::string_view text);

}  // namespace backbone_cdn
