#include "backbone_cdn/socket_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>

#include "backbone_cdn/log.hpp"

namespace backbone_cdn {

namespace {

constexpr std::size_t kMaxRequestLine = 8192;

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Waits for `events` on fd until `deadline` (monotonic ms). False on timeout.
bool wait_for(int fd, short events, std::optional<double> deadline) {
  while (true) {
    int wait = -1;
    if (deadline) {
      const double left = *deadline - monotonic_ms();
      if (left <= 0) return false;
      wait = static_cast<int>(left) + 1;
    }
    pollfd p{fd, events, 0};
    const int r = ::poll(&p, 1, wait);
    if (r > 0) return true;
    if (r == 0) {
      if (deadline && monotonic_ms() >= *deadline) return false;
      continue;
    }
    if (errno != EINTR) return true;  // let the following call report the error
  }
}

addrinfo* resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res) != 0) return nullptr;
  return res;
}

}  // namespace

double monotonic_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

Endpoint parse_endpoint(std::string_view text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ParseError("endpoint '" + std::string(text) + "': expected host:port");
  }
  std::string_view host = text.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  const std::string_view port = text.substr(colon + 1);
  unsigned value = 0;
  auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (port.empty() || ec != std::errc{} || p != port.data() + port.size() || value > 65535) {
    throw ParseError("endpoint '" + std::string(text) + "': bad port");
  }
  return Endpoint{std::string(host), static_cast<std::uint16_t>(value)};
}

std::map<NodeId, Endpoint> parse_address_book(std::string_view text) {
  std::map<NodeId, Endpoint> book;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "address book line " + std::to_string(line_no);
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(where + ": expected <node_id>\\t<host>:<port>");
    const std::string_view id = line.substr(0, tab);
    if (!NodeId::is_valid(id)) throw ParseError(where + ": invalid node id");
    Endpoint ep;
    try {
      ep = parse_endpoint(line.substr(tab + 1));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!book.emplace(NodeId(std::string(id)), ep).second) {
      throw ParseError(where + ": duplicate node '" + std::string(id) + "'");
    }
  }
  return book;
}

void SocketTransport::set_address(const NodeId& node, Endpoint endpoint) {
  std::unique_lock lock(mu_);
  book_.insert_or_assign(node, std::move(endpoint));
}

Exchange SocketTransport::request(const NodeId& /*from*/, const NodeId& to, std::string_view request,
                                  double at_ms, std::optional<double> timeout_ms) {
  const double start = monotonic_ms();
  // Reported times are at_ms plus elapsed wall time.
  auto since = [&](double t) { return at_ms + (t - start); };
  Endpoint target;
  {
    std::shared_lock lock(mu_);
    auto it = book_.find(to);
    if (it == book_.end()) {
      throw TransportError(TransportFailure::unknown_node, "no address for '" + to.str() + "'", at_ms);
    }
    target = it->second;
  }
  const std::optional<double> deadline = timeout_ms ? std::optional(start + *timeout_ms) : std::nullopt;
  auto fail = [&](const std::string& what) -> TransportError {
    return TransportError(TransportFailure::unavailable, to.str() + " (" + target.str() + "): " + what,
                          since(monotonic_ms()));
  };
  auto timed_out = [&] {
    return TransportError(TransportFailure::timeout, to.str() + ": no response within deadline", *deadline);
  };

  addrinfo* res = resolve(target, false);
  if (res == nullptr) throw fail("cannot resolve host");
  int raw = -1;
  int last_errno = 0;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    raw = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (raw < 0) continue;
    if (::connect(raw, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(raw);
    raw = -1;
  }
  ::freeaddrinfo(res);
  if (raw < 0) throw fail(std::strerror(last_errno));
  Fd sock(raw);
  const int one = 1;
  ::setsockopt(sock.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

  if (!write_all(sock.get(), request)) throw fail(std::string("send: ") + std::strerror(errno));
  ::shutdown(sock.get(), SHUT_WR);

  std::string response;
  char buf[64 * 1024];
  while (true) {
    if (!wait_for(sock.get(), POLLIN, deadline)) throw timed_out();
    const ssize_t n = ::recv(sock.get(), buf, sizeof buf, 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      throw fail(std::string("recv: ") + std::strerror(errno));
    }
    response.append(buf, static_cast<std::size_t>(n));
  }
  if (response.empty()) throw fail("connection closed without a response");
  return Exchange{std::move(response), since(monotonic_ms())};
}

SocketServer::SocketServer(NodeId self, Service& service, Transport& upstream, const Endpoint& listen)
    : self_(std::move(self)), service_(service), upstream_(upstream) {
  addrinfo* res = resolve(listen, true);
  if (res == nullptr) throw BindError("cannot resolve listen address " + listen.str());
  int last_errno = 0;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_errno = errno;
      continue;
    }
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 128) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_errno = errno;
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) throw BindError("cannot listen on " + listen.str() + ": " + std::strerror(last_errno));

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  if (addr.ss_family == AF_INET) {
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  } else {
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  }
}

SocketServer::~SocketServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void SocketServer::start() {
  acceptor_ = std::thread([this] { run(); });
}

void SocketServer::run() {
  log::info("{}: listening on port {}", self_.str(), port_);
  while (!stopping_.load()) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, 100);
    reap(false);
    if (r <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(workers_mu_);
    workers_.push_back(Worker{std::thread([this, fd, done] {
                                serve_connection(fd);
                                done->store(true);
                              }),
                              done});
  }
}

void SocketServer::stop() {
  stopping_.store(true);
  if (acceptor_.joinable()) acceptor_.join();
  reap(true);
}

void SocketServer::reap(bool all) {
  std::list<Worker> finished;
  {
    std::lock_guard lock(workers_mu_);
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (all || it->done->load()) {
        finished.splice(finished.end(), workers_, it++);
      } else {
        ++it;
      }
    }
  }
  for (auto& w : finished) w.thread.join();
}

void SocketServer::serve_connection(int raw) {
  Fd sock(raw);
  std::string request;
  char buf[4096];
  const double deadline = monotonic_ms() + 30000.0;
  while (request.find('\n') == std::string::npos && request.size() <= kMaxRequestLine) {
    if (!wait_for(sock.get(), POLLIN, deadline)) return;
    const ssize_t n = ::recv(sock.get(), buf, sizeof buf, 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      return;
    }
    request.append(buf, static_cast<std::size_t>(n));
  }
  CallContext ctx(self_, std::nullopt, monotonic_ms(), upstream_);
  std::string response;
  try {
    response = service_.handle(request, ctx);
  } catch (const std::exception& e) {
    log::error("{}: handler failed: {}", self_.str(), e.what());
    response = "ERR 500 INTERNAL\n";
  }
  write_all(sock.get(), response);
}

}  // namespace backbone_cdn
