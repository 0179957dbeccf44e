#include "backbone_cdn/client.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "backbone_cdn/log.hpp"
#include "backbone_cdn/wire.hpp"

namespace backbone_cdn {

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double phi1 = a.lat * kRad;
  const double phi2 = b.lat * kRad;
  const double dphi = (b.lat - a.lat) * kRad;
  const double dlambda = (b.lon - a.lon) * kRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
}

void ClientConfig::validate() const {
  if (caches.empty()) throw ValidationError("client: no caches configured");
  if (!(deadline_ms > 0.0)) throw ValidationError("client: deadline_ms must be > 0");
  if (max_attempts < 1) throw ValidationError("client: max_attempts must be >= 1");
}

std::vector<NodeId> order_caches(const ClientConfig& config) {
  std::vector<std::pair<double, NodeId>> ranked;
  ranked.reserve(config.caches.size());
  for (const auto& c : config.caches) ranked.emplace_back(haversine_km(config.position, c.geo), c.id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<NodeId> out;
  out.reserve(ranked.size());
  for (auto& [_, id] : ranked) out.push_back(std::move(id));
  return out;
}

std::string_view to_string(AttemptResult r) {
  switch (r) {
    case AttemptResult::ok: return "ok";
    case AttemptResult::unavailable: return "unavailable";
    case AttemptResult::slow: return "slow";
  }
  return "?";
}

ReadReport read_with_failover(const NodeId& self, const ClientConfig& config, const FileId& file,
                              std::uint64_t offset, std::uint64_t length, Transport& transport, double at_ms) {
  config.validate();
  const std::string request = wire::encode(wire::Request{wire::Verb::read, file, offset, length});
  std::vector<Attempt> attempts;
  double now = at_ms;

  for (const NodeId& cache : order_caches(config)) {
    if (attempts.size() >= config.max_attempts) break;
    Exchange ex;
    try {
      ex = transport.request(self, cache, request, now, config.deadline_ms);
    } catch (const TransportError& e) {
      const auto result = e.kind() == TransportFailure::timeout ? AttemptResult::slow : AttemptResult::unavailable;
      attempts.push_back({cache, result});
      now = std::max(now, e.failed_at_ms());
      log::debug("{}: {} {} ({})", self.str(), cache.str(), to_string(result), e.what());
      continue;
    }
    if (ex.completed_at_ms - now > config.deadline_ms) {
      // The transport did not enforce the deadline itself.
      attempts.push_back({cache, AttemptResult::slow});
      now += config.deadline_ms;
      continue;
    }

    wire::Response resp;
    try {
      resp = wire::parse_response(ex.response);
    } catch (const wire::ProtocolError& e) {
      attempts.push_back({cache, AttemptResult::unavailable});
      now = ex.completed_at_ms;
      log::warn("{}: malformed response from {}: {}", self.str(), cache.str(), e.what());
      continue;
    }
    if (auto* ok = std::get_if<wire::OkResponse>(&resp); ok != nullptr && ok->data.size() == length) {
      attempts.push_back({cache, AttemptResult::ok});
      return ReadReport{cache, std::move(attempts), std::move(ok->data), ex.completed_at_ms};
    }
    if (auto* err = std::get_if<wire::ErrResponse>(&resp)) {
      if (err->code == wire::ErrorCode::not_found) throw NotFound(file.path() + ": not found (via " + cache.str() + ")");
      if (err->code == wire::ErrorCode::bad_request) throw RangeError(file.path() + ": " + err->message);
    }
    attempts.push_back({cache, AttemptResult::unavailable});
    now = ex.completed_at_ms;
  }
  std::string what = file.path() + ": all " + std::to_string(attempts.size()) + " cache attempts failed";
  throw AllCachesFailed(std::move(what), std::move(attempts), now);
}

std::map<NodeId, GeoPoint> parse_geo_table(std::string_view text) {
  std::map<NodeId, GeoPoint> table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "geo table line " + std::to_string(line_no);
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw ParseError(where + ": expected 3 tab-separated fields");
    }
    const auto id = line.substr(0, t1);
    if (!NodeId::is_valid(id)) throw ParseError(where + ": invalid node id");
    auto num = [&](std::string_view s) {
      double v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(where + ": bad number '" + std::string(s) + "'");
      return v;
    };
    const double lat = num(line.substr(t1 + 1, t2 - t1 - 1));
    const double lon = num(line.substr(t2 + 1));
    try {
      if (!table.emplace(NodeId(std::string(id)), GeoPoint::make(lat, lon)).second) {
        throw ParseError(where + ": duplicate node '" + std::string(id) + "'");
      }
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return table;
}

std::string format_geo_table(const std::map<NodeId, GeoPoint>& table) {
  std::string out;
  char buf[64];
  for (const auto& [id, g] : table) {
    std::snprintf(buf, sizeof buf, "\t%.17g\t%.17g\n", g.lat, g.lon);
    out += id.str() + buf;
  }
  return out;
}

}  // namespace backbone_cdn
