#pragma once

// Deterministic simulated network.
//
// Each request/response is one atomic exchange. A request from A to B
// started at `at` reaches B at at + latency * slow_factor; B's handler runs
// (possibly making nested exchanges), and the response arrives back after
// another latency * slow_factor plus payload / bandwidth. A target that is
// down at any instant of the exchange makes it fail as unavailable.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "backbone_cdn/transport.hpp"

namespace backbone_cdn {

struct FaultWindow {
  enum class Kind { down, slow };

  NodeId node;
  double from_ms = 0.0;
  double to_ms = 0.0;
  Kind kind = Kind::down;
  double factor = 1.0;

  // Half-open [from_ms, to_ms), like access-log windows.
  bool covers(double t) const { return t >= from_ms && t < to_ms; }
  /// True when the closed exchange interval [a, b] touches the window.
  bool overlaps(double a, double b) const { return from_ms <= b && a < to_ms; }
};

struct LinkSpec {
  NodeId from;
  NodeId to;
  std::optional<double> latency_ms;
  std::optional<double> bandwidth_bytes_per_ms;
};

struct SimConfig {
  double default_latency_ms = 0.0;
  double default_bandwidth_bytes_per_ms = 1e12;
  std::vector<LinkSpec> links;
  std::vector<FaultWindow> faults;
  std::uint64_t seed = 0;

  /// One-way latency; links are symmetric unless both directions are listed.
  double latency(const NodeId& a, const NodeId& b) const;
  double bandwidth(const NodeId& a, const NodeId& b) const;
  /// Largest slow factor of any window on `node` covering `t` (1 if none).
  double slow_factor(const NodeId& node, double t) const;
  /// First down window on `node` overlapping [a, b].
  const FaultWindow* down_during(const NodeId& node, double a, double b) const;

  void validate() const;
};

SimConfig parse_sim_config(std::string_view text);

struct ExchangeRecord {
  double at_ms = 0.0;
  double completed_at_ms = 0.0;
  NodeId from;
  NodeId to;
  std::string request_line;  // without the trailing LF
  std::uint64_t payload_bytes = 0;
  std::optional<TransportFailure> failure;
};

class SimNetwork final : public Transport {
 public:
  explicit SimNetwork(SimConfig config);

  /// Nodes that only originate requests (clients) are added without a service.
  void add_node(const NodeId& id, Service* service = nullptr);
  bool has_node(const NodeId& id) const { return nodes_.contains(id); }

  Exchange request(const NodeId& from, const NodeId& to, std::string_view request, double at_ms,
                   std::optional<double> timeout_ms = std::nullopt) override;

  // Event loop. Events run in (time, insertion order); the clock only moves
  // when an event is processed.
  void schedule(double at_ms, std::function<void()> fn);
  void run_until(double t_ms);
  void run();
  std::size_t pending() const { return queue_.size(); }
  double now() const { return now_ms_; }

  const SimConfig& config() const { return config_; }
  const std::vector<ExchangeRecord>& exchanges() const { return log_; }
  /// Stable text rendering of the exchange log.
  std::string log_text() const;

 private:
  struct Event {
    double at_ms;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at_ms != b.at_ms) return a.at_ms > b.at_ms;
      return a.seq > b.seq;
    }
  };

  SimConfig config_;
  std::map<NodeId, Service*> nodes_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ms_ = 0.0;
  std::vector<ExchangeRecord> log_;
};

}  // namespace backbone_cdn
