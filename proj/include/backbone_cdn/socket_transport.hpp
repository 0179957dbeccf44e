#pragma once

// The wire protocol over TCP: one request per connection. The client writes
// the request, half-closes, and reads the response until EOF.

#include <atomic>
#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>

#include "backbone_cdn/transport.hpp"

namespace backbone_cdn {

class BindError : public Error {
 public:
  using Error::Error;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

/// `host:port`; throws ParseError.
Endpoint parse_endpoint(std::string_view text);

/// Address book: one `<node_id>\t<host>:<port>` row per line.
std::map<NodeId, Endpoint> parse_address_book(std::string_view text);

/// Milliseconds on a monotonic clock.
double monotonic_ms();

class SocketTransport final : public Transport {
 public:
  explicit SocketTransport(std::map<NodeId, Endpoint> book = {}) : book_(std::move(book)) {}

  void set_address(const NodeId& node, Endpoint endpoint);

  /// Reported times are `at_ms` plus the elapsed time on the monotonic clock.
  Exchange request(const NodeId& from, const NodeId& to, std::string_view request, double at_ms,
                   std::optional<double> timeout_ms = std::nullopt) override;

 private:
  mutable std::shared_mutex mu_;
  std::map<NodeId, Endpoint> book_;
};

/// Accepts connections and runs each on its own thread.
class SocketServer {
 public:
  /// Binds and listens immediately; throws BindError. Port 0 picks a free port.
  SocketServer(NodeId self, Service& service, Transport& upstream, const Endpoint& listen);
  ~SocketServer();
  SocketServer(const SocketServer&) = delete;
  SocketServer& operator=(const SocketServer&) = delete;

  std::uint16_t port() const { return port_; }
  /// Accept loop on a background thread.
  void start();
  /// Accept loop on the calling thread until stop().
  void run();
  void stop();

 private:
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void serve_connection(int fd);
  void reap(bool all);

  NodeId self_;
  Service& service_;
  Transport& upstream_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex workers_mu_;
  std::list<Worker> workers_;
};

}  // namespace backbone_cdn
