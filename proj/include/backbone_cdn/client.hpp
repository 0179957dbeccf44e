#pragma once

// Client-side cache selection: order caches by great-circle distance from
// the client and read through the nearest, failing over to the next one
// when a cache is unavailable or misses the response deadline.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "backbone_cdn/core.hpp"
#include "backbone_cdn/transport.hpp"

namespace backbone_cdn {

inline constexpr double kEarthRadiusKm = 6371.0;

double haversine_km(const GeoPoint& a, const GeoPoint& b);

struct CacheSite {
  NodeId id;
  GeoPoint geo;
};

struct ClientConfig {
  std::vector<CacheSite> caches;
  GeoPoint position;
  double deadline_ms = 5000.0;
  std::size_t max_attempts = 1;

  void validate() const;
};

/// Ascending distance from the client; equal distances by ascending NodeId.
std::vector<NodeId> order_caches(const ClientConfig& config);

enum class AttemptResult { ok, unavailable, slow };

std::string_view to_string(AttemptResult r);

struct Attempt {
  NodeId cache;
  AttemptResult result = AttemptResult::ok;

  friend bool operator==(const Attempt&, const Attempt&) = default;
};

struct ReadReport {
  NodeId served_by;
  std::vector<Attempt> attempts;
  std::string data;
  double completed_at_ms = 0.0;
};

class AllCachesFailed : public Error {
 public:
  AllCachesFailed(std::string message, std::vector<Attempt> attempts, double failed_at_ms)
      : Error(std::move(message)), attempts_(std::move(attempts)), failed_at_ms_(failed_at_ms) {}

  const std::vector<Attempt>& attempts() const { return attempts_; }
  double failed_at_ms() const { return failed_at_ms_; }

 private:
  std::vector<Attempt> attempts_;
  double failed_at_ms_;
};

/// Tries caches in order_caches order, one at a time. ERR 404 ends the chain
/// with NotFound; ERR 400 with RangeError. Throws AllCachesFailed when the
/// chain or max_attempts is exhausted.
ReadReport read_with_failover(const NodeId& self, const ClientConfig& config, const FileId& file,
                              std::uint64_t offset, std::uint64_t length, Transport& transport, double at_ms);

/// Geo table: one `<node_id>\t<lat_deg>\t<lon_deg>` row per line.
std::map<NodeId, GeoPoint> parse_geo_table(std::string_view text);
std::string format_geo_table(const std::map<NodeId, GeoPoint>& table);

}  // namespace backbone_cdn
