#pragma once

// Wire-protocol services: origin (data server), redirector, and cache.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "backbone_cdn/cache_engine.hpp"
#include "backbone_cdn/federation.hpp"
#include "backbone_cdn/transport.hpp"

namespace backbone_cdn {

struct DeploymentConfig;

/// Authoritative storage exporting synthetic files.
class OriginService final : public Service {
 public:
  explicit OriginService(NodeId id) : id_(std::move(id)) {}

  void add_file(const FileMeta& meta);
  /// Replaces the content of an existing file; its version changes accordingly.
  void set_seed(const FileId& file, std::uint64_t seed);
  std::optional<FileMeta> file(const FileId& file) const;
  const NodeId& id() const { return id_; }

  std::string handle(std::string_view request, CallContext& ctx) override;

 private:
  NodeId id_;
  mutable std::mutex mu_;
  std::map<FileId, FileMeta> files_;
};

/// Answers LOCATE from the shared federation index.
class RedirectorService final : public Service {
 public:
  RedirectorService(NodeId id, std::shared_ptr<const Federation> federation)
      : id_(std::move(id)), federation_(std::move(federation)) {}

  std::string handle(std::string_view request, CallContext& ctx) override;

 private:
  NodeId id_;
  std::shared_ptr<const Federation> federation_;
};

/// Upstream reached through the wire protocol: LOCATE at a redirector, then
/// STAT/READ at the data server it names.
class WireUpstream final : public Upstream {
 public:
  WireUpstream(CallContext& ctx, NodeId redirector) : ctx_(ctx), redirector_(std::move(redirector)) {}

  NodeId locate(const FileId& file) override;
  FileStat stat(const NodeId& server, const FileId& file) override;
  std::string read(const NodeId& server, const FileId& file, std::uint64_t offset, std::uint64_t length) override;

 private:
  std::string call(const NodeId& to, const std::string& request);

  CallContext& ctx_;
  NodeId redirector_;
};

/// Per-READ notification from a cache, used for access accounting.
struct ServeEvent {
  NodeId cache;
  std::optional<NodeId> peer;
  FileId file;
  double at_ms = 0.0;
  std::uint64_t file_size = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_from_cache = 0;
  std::uint64_t bytes_from_origin = 0;
  std::uint64_t version = 0;
  Classification classification = Classification::hit;
};

class CacheService final : public Service {
 public:
  CacheService(NodeId id, const CacheConfig& config, NodeId redirector)
      : id_(std::move(id)), redirector_(std::move(redirector)), engine_(config) {}

  CacheEngine& engine() { return engine_; }
  const NodeId& id() const { return id_; }
  void set_observer(std::function<void(const ServeEvent&)> observer);

  std::string handle(std::string_view request, CallContext& ctx) override;

 private:
  NodeId id_;
  NodeId redirector_;
  CacheEngine engine_;
  std::mutex observer_mu_;
  std::function<void(const ServeEvent&)> observer_;
};

/// Every service of a deployment, wired to one shared federation index.
struct ServiceSet {
  std::shared_ptr<Federation> federation;
  std::map<NodeId, std::unique_ptr<OriginService>> origins;
  std::map<NodeId, std::unique_ptr<RedirectorService>> redirectors;
  std::map<NodeId, std::unique_ptr<CacheService>> caches;

  static ServiceSet build(const DeploymentConfig& config);
  Service* find(const NodeId& id) const;
};

}  // namespace backbone_cdn
