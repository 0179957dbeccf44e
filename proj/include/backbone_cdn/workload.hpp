#pragma once

// Synthetic workloads and the trace file format.
//
// All randomness comes from a SplitMix64 sequence seeded by WorkloadSpec::seed:
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
// Draw order: for each file, its size then its content seed; then for each
// access, the file (popularity), the client, the timestamp, and for
// random_range reads the length then the offset.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "backbone_cdn/core.hpp"
#include "backbone_cdn/deployment.hpp"

namespace backbone_cdn {

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Unbiased integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// In [lo, hi], inclusive.
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi);
  /// In [0, 1) with 53 bits of precision.
  double unit();

 private:
  std::uint64_t state_;
};

struct UniformSizes {
  std::uint64_t min = 0;
  std::uint64_t max = 0;
};
struct FixedSize {
  std::uint64_t size = 0;
};
/// Bounded power-law sizes in [min, max] with exponent s.
struct ZipfSizes {
  std::uint64_t min = 1;
  std::uint64_t max = 1;
  double s = 1.0;
};
using SizeDistribution = std::variant<UniformSizes, FixedSize, ZipfSizes>;

struct UniformPopularity {};
/// File of rank k (1-based, in catalog order) is drawn with weight 1 / k^s.
struct ZipfPopularity {
  double s = 1.0;
};
using Popularity = std::variant<UniformPopularity, ZipfPopularity>;

struct FullFile {};
struct RandomRange {
  std::uint64_t min_len = 0;
  std::uint64_t max_len = 0;
};
using ReadStyle = std::variant<FullFile, RandomRange>;

struct WorkloadSpec {
  std::string ns;
  std::uint64_t file_count = 1;
  SizeDistribution sizes = FixedSize{1};
  std::uint64_t access_count = 0;
  Popularity popularity = UniformPopularity{};
  ReadStyle read_style = FullFile{};
  std::int64_t duration_ms = 1;
  std::uint64_t seed = 0;
  std::vector<NodeId> origins{NodeId("origin")};  // files are assigned round-robin

  /// Throws InvalidSpec naming the field.
  void validate() const;
};

/// Throws ParseError for malformed JSON and InvalidSpec for bad values.
WorkloadSpec parse_workload_spec(std::string_view text);

struct TraceEvent {
  std::int64_t t_ms = 0;
  NodeId client;
  FileId file;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
  std::vector<CatalogEntry> catalog;
  std::vector<TraceEvent> events;

  const CatalogEntry* find(const FileId& file) const;
  /// Sorted events, known files, ranges inside files. Throws ValidationError.
  void validate() const;

  friend bool operator==(const Trace&, const Trace&) = default;
};

Trace generate(const WorkloadSpec& spec, const std::vector<NodeId>& clients);

std::string format_trace(const Trace& trace);
/// Throws ParseError naming the line.
Trace parse_trace(std::string_view text);

}  // namespace backbone_cdn
