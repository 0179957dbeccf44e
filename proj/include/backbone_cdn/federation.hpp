#pragma once

// Tree of redirectors and data servers with escalating lookup.
//
// A lookup entering at a redirector searches that redirector's subtree
// depth-first (children in ascending NodeId order). If no data server there
// holds the file, the parent is consulted and its not-yet-searched subtrees
// are searched the same way, continuing up to the root.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <vector>

#include "backbone_cdn/core.hpp"

namespace backbone_cdn {

struct DeploymentConfig;

class NotARedirector : public Error {
 public:
  using Error::Error;
};

class NotADataServer : public Error {
 public:
  using Error::Error;
};

enum class FederationKind { data_server, redirector };

struct LocateResult {
  std::optional<NodeId> server;  // empty when not found
  std::size_t hops = 0;          // redirectors consulted, entry included

  bool found() const { return server.has_value(); }
};

class Federation {
 public:
  Federation() = default;
  Federation(const Federation&) = delete;
  Federation& operator=(const Federation&) = delete;

  /// Origins become data servers; every catalog file is registered at its origin.
  static std::unique_ptr<Federation> from_deployment(const DeploymentConfig& config);

  /// Tree construction. Parents must be added before their children.
  void add_redirector(const NodeId& id, const std::optional<NodeId>& parent);
  void add_data_server(const NodeId& id, const NodeId& parent);

  LocateResult locate(const NodeId& entry, const FileId& file) const;

  void register_file(const NodeId& server, const FileId& file);
  void deregister_file(const NodeId& server, const FileId& file);

  bool holds(const NodeId& server, const FileId& file) const;
  std::optional<FederationKind> kind(const NodeId& id) const;
  std::optional<NodeId> parent(const NodeId& id) const;
  std::vector<NodeId> children(const NodeId& id) const;
  std::size_t redirector_count() const;

 private:
  struct Node {
    FederationKind kind;
    std::optional<NodeId> parent;
    std::set<NodeId> children;  // ordered: defines the search order
    std::set<FileId> holdings;
  };

  // Depth-first search below `at`, skipping the subtree rooted at `skip`.
  std::optional<NodeId> search(const NodeId& at, const FileId& file, const NodeId* skip,
                               std::size_t& hops) const;
  Node& data_server(const NodeId& id);

  mutable std::shared_mutex mu_;
  std::map<NodeId, Node> nodes_;
};

}  // namespace backbone_cdn
