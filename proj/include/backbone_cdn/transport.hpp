#pragma once

// Request/response transport shared by the simulator and the TCP transport,
// plus the synchronous service interface both of them drive.

#include <optional>
#include <string>
#include <string_view>

#include "backbone_cdn/core.hpp"

namespace backbone_cdn {

enum class TransportFailure { unavailable, unknown_node, timeout };

std::string_view to_string(TransportFailure kind);

class TransportError : public Error {
 public:
  TransportError(TransportFailure kind, std::string message, double failed_at_ms = 0.0)
      : Error(std::move(message)), kind_(kind), failed_at_ms_(failed_at_ms) {}

  TransportFailure kind() const { return kind_; }
  /// When the caller learned of the failure (simulated or wall-clock ms).
  double failed_at_ms() const { return failed_at_ms_; }

 private:
  TransportFailure kind_;
  double failed_at_ms_;
};

struct Exchange {
  std::string response;
  double completed_at_ms = 0.0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// One request/response exchange started at `at_ms`. A transport may stop
  /// waiting after `timeout_ms` and throw TransportError(timeout).
  virtual Exchange request(const NodeId& from, const NodeId& to, std::string_view request, double at_ms,
                           std::optional<double> timeout_ms = std::nullopt) = 0;
};

/// What a service handler sees: its own identity, the current time, and a
/// way to make nested requests. Nested requests advance `now_ms`.
class CallContext {
 public:
  CallContext(NodeId self, std::optional<NodeId> peer, double now_ms, Transport& transport)
      : self_(std::move(self)), peer_(std::move(peer)), now_ms_(now_ms), transport_(&transport) {}

  const NodeId& self() const { return self_; }
  const std::optional<NodeId>& peer() const { return peer_; }
  double now_ms() const { return now_ms_; }

  std::string call(const NodeId& to, std::string_view request) {
    Exchange ex = transport_->request(self_, to, request, now_ms_);
    now_ms_ = ex.completed_at_ms;
    return std::move(ex.response);
  }

 private:
  NodeId self_;
  std::optional<NodeId> peer_;
  double now_ms_;
  Transport* transport_;
};

class Service {
 public:
  virtual ~Service() = default;
  /// Returns the full encoded response. Must not throw for bad input; protocol
  /// errors become ERR responses.
  virtual std::string handle(std::string_view request, CallContext& ctx) = 0;
};

}  // namespace backbone_cdn
