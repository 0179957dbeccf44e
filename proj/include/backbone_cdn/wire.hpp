#pragma once

// Line-oriented request/response protocol spoken by every service.
//
//   V1 READ <path> <offset> <length>\n  ->  OK <n>\n<n raw bytes> | ERR <code> <message>\n
//   V1 STAT <path>\n                    ->  STAT <size> <version-hex16>\n
//   V1 LOCATE <path>\n                  ->  AT <node-id>\n
//   V1 PURGE <path>\n                   ->  OK 0\n
//
// One request per exchange; no pipelining.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "backbone_cdn/core.hpp"

namespace backbone_cdn::wire {

class ProtocolError : public Error {
 public:
  using Error::Error;
};

enum class Verb { read, stat, locate, purge };

struct Request {
  Verb verb = Verb::stat;
  FileId path;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  friend bool operator==(const Request&, const Request&) = default;
};

enum class ErrorCode : int {
  bad_request = 400,
  not_found = 404,
  internal = 500,
  unavailable = 503,
};

std::string_view error_name(ErrorCode code);

struct OkResponse {
  std::string data;
};
struct StatResponse {
  std::uint64_t size = 0;
  std::uint64_t version = 0;
};
struct AtResponse {
  NodeId node;
};
struct ErrResponse {
  ErrorCode code = ErrorCode::internal;
  std::string message;
};

using Response = std::variant<OkResponse, StatResponse, AtResponse, ErrResponse>;

std::string encode(const Request& request);
/// Throws ProtocolError on anything but a single well-formed request line.
Request parse_request(std::string_view bytes);

std::string encode(const Response& response);
std::string encode_error(ErrorCode code, std::string_view detail = {});
/// Throws ProtocolError on a malformed or truncated response.
Response parse_response(std::string_view bytes);

/// Number of raw payload bytes following the status line (0 unless `OK <n>`).
std::uint64_t payload_size(std::string_view response_bytes);

}  // namespace backbone_cdn::wire
