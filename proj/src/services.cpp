#include "backbone_cdn/services.hpp"

#include <cmath>

#include "backbone_cdn/content.hpp"
#include "backbone_cdn/deployment.hpp"
#include "backbone_cdn/log.hpp"
#include "backbone_cdn/wire.hpp"

namespace backbone_cdn {

using wire::ErrorCode;

namespace {

std::string bad_request(std::string_view detail) { return wire::encode_error(ErrorCode::bad_request, detail); }

}  // namespace

// --- origin ---------------------------------------------------------------

void OriginService::add_file(const FileMeta& meta) {
  std::lock_guard lock(mu_);
  files_[meta.id] = meta;
}

void OriginService::set_seed(const FileId& file, std::uint64_t seed) {
  std::lock_guard lock(mu_);
  auto it = files_.find(file);
  if (it == files_.end()) throw NotFound(file.path() + " not exported by " + id_.str());
  it->second = FileMeta::make(file, it->second.size, seed);
}

std::optional<FileMeta> OriginService::file(const FileId& file) const {
  std::lock_guard lock(mu_);
  auto it = files_.find(file);
  if (it == files_.end()) return std::nullopt;
  return it->second;
}

std::string OriginService::handle(std::string_view request, CallContext& /*ctx*/) {
  wire::Request req;
  try {
    req = wire::parse_request(request);
  } catch (const wire::ProtocolError& e) {
    return bad_request(e.what());
  }
  if (req.verb != wire::Verb::read && req.verb != wire::Verb::stat) {
    return bad_request("origins answer READ and STAT only");
  }
  const auto meta = file(req.path);
  if (!meta) return wire::encode_error(ErrorCode::not_found);
  if (req.verb == wire::Verb::stat) return wire::encode(wire::Response{wire::StatResponse{meta->size, meta->version}});
  if (req.offset > meta->size || req.length > meta->size - req.offset) return bad_request("range outside file");
  return wire::encode(wire::Response{wire::OkResponse{make_content(meta->gen_seed, req.offset, req.length)}});
}

// --- redirector -----------------------------------------------------------

std::string RedirectorService::handle(std::string_view request, CallContext& /*ctx*/) {
  wire::Request req;
  try {
    req = wire::parse_request(request);
  } catch (const wire::ProtocolError& e) {
    return bad_request(e.what());
  }
  if (req.verb != wire::Verb::locate) return bad_request("redirectors answer LOCATE only");
  try {
    const LocateResult r = federation_->locate(id_, req.path);
    if (!r.found()) return wire::encode_error(ErrorCode::not_found);
    return wire::encode(wire::Response{wire::AtResponse{*r.server}});
  } catch (const Error& e) {
    return wire::encode_error(ErrorCode::internal, e.what());
  }
}

// --- upstream over the wire -----------------------------------------------

std::string WireUpstream::call(const NodeId& to, const std::string& request) {
  try {
    return ctx_.call(to, request);
  } catch (const TransportError& e) {
    throw OriginUnavailable("'" + to.str() + "': " + e.what());
  }
}

namespace {

template <typename Expected>
const Expected& expect(const wire::Response& resp, const FileId& file, const NodeId& from) {
  if (const auto* ok = std::get_if<Expected>(&resp)) return *ok;
  if (const auto* err = std::get_if<wire::ErrResponse>(&resp)) {
    if (err->code == ErrorCode::not_found) throw NotFound(file.path() + ": not found via '" + from.str() + "'");
    throw OriginUnavailable(file.path() + ": '" + from.str() + "' answered ERR " +
                            std::to_string(static_cast<int>(err->code)) + " " + err->message);
  }
  throw OriginUnavailable(file.path() + ": unexpected response from '" + from.str() + "'");
}

wire::Response parse_or_unavailable(const std::string& bytes, const NodeId& from) {
  try {
    return wire::parse_response(bytes);
  } catch (const wire::ProtocolError& e) {
    throw OriginUnavailable("malformed response from '" + from.str() + "': " + e.what());
  }
}

}  // namespace

NodeId WireUpstream::locate(const FileId& file) {
  const std::string resp = call(redirector_, wire::encode(wire::Request{wire::Verb::locate, file, 0, 0}));
  return expect<wire::AtResponse>(parse_or_unavailable(resp, redirector_), file, redirector_).node;
}

FileStat WireUpstream::stat(const NodeId& server, const FileId& file) {
  const std::string resp = call(server, wire::encode(wire::Request{wire::Verb::stat, file, 0, 0}));
  const wire::Response parsed = parse_or_unavailable(resp, server);
  const auto& s = expect<wire::StatResponse>(parsed, file, server);
  return FileStat{s.size, s.version};
}

std::string WireUpstream::read(const NodeId& server, const FileId& file, std::uint64_t offset,
                               std::uint64_t length) {
  const std::string resp = call(server, wire::encode(wire::Request{wire::Verb::read, file, offset, length}));
  auto parsed = parse_or_unavailable(resp, server);
  if (auto* ok = std::get_if<wire::OkResponse>(&parsed)) return std::move(ok->data);
  expect<wire::OkResponse>(parsed, file, server);  // throws
  return {};
}

// --- cache ----------------------------------------------------------------

void CacheService::set_observer(std::function<void(const ServeEvent&)> observer) {
  std::lock_guard lock(observer_mu_);
  observer_ = std::move(observer);
}

std::string CacheService::handle(std::string_view request, CallContext& ctx) {
  wire::Request req;
  try {
    req = wire::parse_request(request);
  } catch (const wire::ProtocolError& e) {
    return bad_request(e.what());
  }
  WireUpstream upstream(ctx, redirector_);
  const double arrived = ctx.now_ms();
  const auto now = static_cast<std::int64_t>(std::floor(arrived));
  try {
    switch (req.verb) {
      case wire::Verb::read: {
        ReadOutcome out = engine_.read(req.path, req.offset, req.length, now, upstream);
        log::debug("{} READ {} [{}+{}] {}", id_.str(), req.path.path(), req.offset, req.length,
                   to_string(out.classification));
        {
          std::lock_guard lock(observer_mu_);
          if (observer_) {
            observer_(ServeEvent{id_, ctx.peer(), req.path, arrived, out.file_size, req.length,
                                 out.bytes_from_cache, out.bytes_from_origin, out.version, out.classification});
          }
        }
        return wire::encode(wire::Response{wire::OkResponse{std::move(out.data)}});
      }
      case wire::Verb::stat: {
        if (auto cached = engine_.cached_stat(req.path)) {
          return wire::encode(wire::Response{wire::StatResponse{cached->size, cached->version}});
        }
        const NodeId server = upstream.locate(req.path);
        const FileStat s = upstream.stat(server, req.path);
        return wire::encode(wire::Response{wire::StatResponse{s.size, s.version}});
      }
      case wire::Verb::purge:
        engine_.purge(req.path);
        return "OK 0\n";
      case wire::Verb::locate:
        return bad_request("caches do not answer LOCATE");
    }
  } catch (const NotFound&) {
    return wire::encode_error(ErrorCode::not_found);
  } catch (const OriginUnavailable& e) {
    return wire::encode_error(ErrorCode::unavailable, e.what());
  } catch (const RangeError& e) {
    return bad_request(e.what());
  } catch (const std::exception& e) {
    return wire::encode_error(ErrorCode::internal, e.what());
  }
  return wire::encode_error(ErrorCode::internal);
}

// --- deployment wiring ----------------------------------------------------

ServiceSet ServiceSet::build(const DeploymentConfig& config) {
  ServiceSet set;
  set.federation = Federation::from_deployment(config);
  for (const NodeSpec* n : config.with_role(Role::origin)) {
    set.origins.emplace(n->id, std::make_unique<OriginService>(n->id));
  }
  for (const auto& e : config.catalog) set.origins.at(e.origin)->add_file(e.meta);
  for (const NodeSpec* n : config.with_role(Role::redirector)) {
    set.redirectors.emplace(n->id, std::make_unique<RedirectorService>(n->id, set.federation));
  }
  for (const NodeSpec* n : config.with_role(Role::cache)) {
    set.caches.emplace(n->id,
                       std::make_unique<CacheService>(n->id, config.caches.at(n->id), config.entry_redirector(n->id)));
  }
  return set;
}

Service* ServiceSet::find(const NodeId& id) const {
  if (auto it = origins.find(id); it != origins.end()) return it->second.get();
  if (auto it = redirectors.find(id); it != redirectors.end()) return it->second.get();
  if (auto it = caches.find(id); it != caches.end()) return it->second.get();
  return nullptr;
}

}  // namespace backbone_cdn
