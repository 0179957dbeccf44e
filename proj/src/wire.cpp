#include "backbone_cdn/wire.hpp"

#include <charconv>
#include <vector>

namespace backbone_cdn::wire {

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t next = line.find(' ', pos);
    if (next == std::string_view::npos) next = line.size();
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view text, std::string_view what, int base = 10) {
  std::uint64_t value = 0;
  if (text.empty()) throw ProtocolError("empty " + std::string(what));
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ProtocolError("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

// Splits off the LF-terminated status line.
std::string_view status_line(std::string_view bytes, std::string_view* rest) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ProtocolError("missing line terminator");
  if (rest != nullptr) *rest = bytes.substr(nl + 1);
  return bytes.substr(0, nl);
}

}  // namespace

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::bad_request: return "BAD_REQUEST";
    case ErrorCode::not_found: return "NOT_FOUND";
    case ErrorCode::internal: return "INTERNAL";
    case ErrorCode::unavailable: return "UNAVAILABLE";
  }
  return "INTERNAL";
}

std::string encode(const Request& request) {
  switch (request.verb) {
    case Verb::read:
      return "V1 READ " + request.path.path() + " " + std::to_string(request.offset) + " " +
             std::to_string(request.length) + "\n";
    case Verb::stat: return "V1 STAT " + request.path.path() + "\n";
    case Verb::locate: return "V1 LOCATE " + request.path.path() + "\n";
    case Verb::purge: return "V1 PURGE " + request.path.path() + "\n";
  }
  throw ProtocolError("unknown verb");
}

Request parse_request(std::string_view bytes) {
  std::string_view rest;
  const std::string_view line = status_line(bytes, &rest);
  if (!rest.empty()) throw ProtocolError("trailing bytes after request line");
  const auto parts = split_spaces(line);
  if (parts.size() < 3 || parts[0] != "V1") throw ProtocolError("malformed request line");
  if (!FileId::is_valid(parts[2])) throw ProtocolError("invalid path '" + std::string(parts[2]) + "'");

  Request req;
  req.path = FileId(std::string(parts[2]));
  const std::string_view verb = parts[1];
  if (verb == "READ") {
    if (parts.size() != 5) throw ProtocolError("READ takes <path> <offset> <length>");
    req.verb = Verb::read;
    req.offset = parse_u64(parts[3], "offset");
    req.length = parse_u64(parts[4], "length");
    return req;
  }
  if (parts.size() != 3) throw ProtocolError("unexpected arguments");
  if (verb == "STAT") {
    req.verb = Verb::stat;
  } else if (verb == "LOCATE") {
    req.verb = Verb::locate;
  } else if (verb == "PURGE") {
    req.verb = Verb::purge;
  } else {
    throw ProtocolError("unknown verb '" + std::string(verb) + "'");
  }
  return req;
}

std::string encode(const Response& response) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, OkResponse>) {
          return "OK " + std::to_string(r.data.size()) + "\n" + r.data;
        } else if constexpr (std::is_same_v<T, StatResponse>) {
          return "STAT " + std::to_string(r.size) + " " + version_hex(r.version) + "\n";
        } else if constexpr (std::is_same_v<T, AtResponse>) {
          return "AT " + r.node.str() + "\n";
        } else {
          return "ERR " + std::to_string(static_cast<int>(r.code)) + " " + r.message + "\n";
        }
      },
      response);
}

std::string encode_error(ErrorCode code, std::string_view detail) {
  std::string message(error_name(code));
  if (!detail.empty()) {
    message += ' ';
    for (char c : detail) message += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return encode(Response{ErrResponse{code, std::move(message)}});
}

Response parse_response(std::string_view bytes) {
  std::string_view rest;
  const std::string_view line = status_line(bytes, &rest);
  const auto parts = split_spaces(line);
  if (parts.empty()) throw ProtocolError("empty response");

  if (parts[0] == "OK") {
    if (parts.size() != 2) throw ProtocolError("malformed OK line");
    const std::uint64_t n = parse_u64(parts[1], "payload length");
    if (rest.size() != n) {
      throw ProtocolError("payload has " + std::to_string(rest.size()) + " bytes, expected " + std::to_string(n));
    }
    return OkResponse{std::string(rest)};
  }
  if (!rest.empty()) throw ProtocolError("trailing bytes after status line");
  if (parts[0] == "STAT") {
    if (parts.size() != 3 || parts[2].size() != 16) throw ProtocolError("malformed STAT line");
    return StatResponse{parse_u64(parts[1], "size"), parse_u64(parts[2], "version", 16)};
  }
  if (parts[0] == "AT") {
    if (parts.size() != 2 || !NodeId::is_valid(parts[1])) throw ProtocolError("malformed AT line");
    return AtResponse{NodeId(std::string(parts[1]))};
  }
  if (parts[0] == "ERR") {
    if (parts.size() < 3) throw ProtocolError("malformed ERR line");
    const std::uint64_t code = parse_u64(parts[1], "error code");
    ErrResponse err;
    switch (code) {
      case 400: err.code = ErrorCode::bad_request; break;
      case 404: err.code = ErrorCode::not_found; break;
      case 500: err.code = ErrorCode::internal; break;
      case 503: err.code = ErrorCode::unavailable; break;
      default: throw ProtocolError("unknown error code " + std::to_string(code));
    }
    err.message = std::string(line.substr(parts[0].size() + parts[1].size() + 2));
    return err;
  }
  throw ProtocolError("unknown response '" + std::string(parts[0]) + "'");
}

std::uint64_t payload_size(std::string_view response_bytes) {
  if (response_bytes.substr(0, 3) != "OK ") return 0;
  const std::size_t nl = response_bytes.find('\n');
  if (nl == std::string_view::npos) return 0;
  return response_bytes.size() - nl - 1;
}

}  // namespace backbone_cdn::wire
