#pragma once

// Deployment document: nodes, per-cache configuration, and the origin catalog.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "backbone_cdn/cache_config.hpp"
#include "backbone_cdn/core.hpp"

namespace backbone_cdn {

enum class Role { origin, redirector, cache, client };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

struct NodeSpec {
  NodeId id;
  Role role = Role::client;
  std::optional<GeoPoint> geo;
  // For origins and redirectors: the federation parent. For caches: the
  // redirector the cache enters the federation at (defaults to the root).
  std::optional<NodeId> parent;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct CatalogEntry {
  FileMeta meta;
  NodeId origin;

  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

struct DeploymentConfig {
  std::vector<NodeSpec> nodes;
  std::map<NodeId, CacheConfig> caches;
  std::vector<CatalogEntry> catalog;

  const NodeSpec* find(const NodeId& id) const;
  const NodeSpec& at(const NodeId& id) const;
  std::vector<const NodeSpec*> with_role(Role role) const;
  /// The redirector without a parent.
  const NodeSpec& root() const;
  /// Entry redirector for a cache node.
  NodeId entry_redirector(const NodeId& cache) const;

  /// Checks all cross-node invariants; throws ValidationError naming the node or field.
  void validate() const;

  friend bool operator==(const DeploymentConfig&, const DeploymentConfig&) = default;
};

DeploymentConfig parse_deployment(std::string_view text);
std::string serialize_deployment(const DeploymentConfig& config);

DeploymentConfig load_deployment(const std::string& path);

/// Reads a whole file; throws Error when it cannot be opened.
std::string read_file(const std::string& path);

}  // namespace backbone_cdn
