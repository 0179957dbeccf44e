#include "backbone_cdn/federation.hpp"

#include <mutex>

#include "backbone_cdn/deployment.hpp"

namespace backbone_cdn {

std::unique_ptr<Federation> Federation::from_deployment(const DeploymentConfig& config) {
  auto fed = std::make_unique<Federation>();
  // Insert top-down so every parent exists before its children.
  std::set<NodeId> added;
  std::vector<const NodeSpec*> pending;
  for (const auto& n : config.nodes) {
    if (n.role == Role::origin || n.role == Role::redirector) pending.push_back(&n);
  }
  while (!pending.empty()) {
    const std::size_t before = pending.size();
    for (auto it = pending.begin(); it != pending.end();) {
      const NodeSpec& n = **it;
      if (n.parent && !added.contains(*n.parent)) {
        ++it;
        continue;
      }
      if (n.role == Role::redirector) {
        fed->add_redirector(n.id, n.parent);
      } else {
        fed->add_data_server(n.id, *n.parent);
      }
      added.insert(n.id);
      it = pending.erase(it);
    }
    if (pending.size() == before) throw ValidationError("federation tree is not rooted");
  }
  for (const auto& e : config.catalog) fed->register_file(e.origin, e.meta.id);
  return fed;
}

void Federation::add_redirector(const NodeId& id, const std::optional<NodeId>& parent) {
  std::unique_lock lock(mu_);
  if (nodes_.contains(id)) throw ValidationError("duplicate federation node '" + id.str() + "'");
  if (parent) {
    auto it = nodes_.find(*parent);
    if (it == nodes_.end()) throw UnknownNode("unknown parent '" + parent->str() + "'");
    if (it->second.kind != FederationKind::redirector) {
      throw NotARedirector("parent '" + parent->str() + "' is not a redirector");
    }
    it->second.children.insert(id);
  } else {
    for (const auto& [other, node] : nodes_) {
      if (node.kind == FederationKind::redirector && !node.parent) {
        throw ValidationError("second root redirector '" + id.str() + "' (root is '" + other.str() + "')");
      }
    }
  }
  nodes_.emplace(id, Node{FederationKind::redirector, parent, {}, {}});
}

void Federation::add_data_server(const NodeId& id, const NodeId& parent) {
  std::unique_lock lock(mu_);
  if (nodes_.contains(id)) throw ValidationError("duplicate federation node '" + id.str() + "'");
  auto it = nodes_.find(parent);
  if (it == nodes_.end()) throw UnknownNode("unknown parent '" + parent.str() + "'");
  if (it->second.kind != FederationKind::redirector) {
    throw NotARedirector("parent '" + parent.str() + "' is not a redirector");
  }
  it->second.children.insert(id);
  nodes_.emplace(id, Node{FederationKind::data_server, parent, {}, {}});
}

std::optional<NodeId> Federation::search(const NodeId& at, const FileId& file, const NodeId* skip,
                                         std::size_t& hops) const {
  const Node& node = nodes_.at(at);
  if (node.kind == FederationKind::data_server) {
    if (node.holdings.contains(file)) return at;
    return std::nullopt;
  }
  ++hops;
  for (const NodeId& child : node.children) {
    if (skip != nullptr && child == *skip) continue;
    if (auto hit = search(child, file, nullptr, hops)) return hit;
  }
  return std::nullopt;
}

LocateResult Federation::locate(const NodeId& entry, const FileId& file) const {
  std::shared_lock lock(mu_);
  auto it = nodes_.find(entry);
  if (it == nodes_.end()) throw UnknownNode("unknown node '" + entry.str() + "'");
  if (it->second.kind != FederationKind::redirector) {
    throw NotARedirector("'" + entry.str() + "' is a data server");
  }
  LocateResult result;
  result.server = search(entry, file, nullptr, result.hops);
  NodeId searched = entry;
  std::optional<NodeId> up = it->second.parent;
  while (!result.server && up) {
    result.server = search(*up, file, &searched, result.hops);
    searched = *up;
    up = nodes_.at(*up).parent;
  }
  return result;
}

Federation::Node& Federation::data_server(const NodeId& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownNode("unknown node '" + id.str() + "'");
  if (it->second.kind != FederationKind::data_server) {
    throw NotADataServer("'" + id.str() + "' is a redirector");
  }
  return it->second;
}

void Federation::register_file(const NodeId& server, const FileId& file) {
  std::unique_lock lock(mu_);
  data_server(server).holdings.insert(file);
}

void Federation::deregister_file(const NodeId& server, const FileId& file) {
  std::unique_lock lock(mu_);
  data_server(server).holdings.erase(file);
}

bool Federation::holds(const NodeId& server, const FileId& file) const {
  std::shared_lock lock(mu_);
  auto it = nodes_.find(server);
  return it != nodes_.end() && it->second.holdings.contains(file);
}

std::optional<FederationKind> Federation::kind(const NodeId& id) const {
  std::shared_lock lock(mu_);
  auto it = nodes_.find(id);
  if (it == nodes_.end()) return std::nullopt;
  return it->second.kind;
}

std::optional<NodeId> Federation::parent(const NodeId& id) const {
  std::shared_lock lock(mu_);
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownNode("unknown node '" + id.str() + "'");
  return it->second.parent;
}

std::vector<NodeId> Federation::children(const NodeId& id) const {
  std::shared_lock lock(mu_);
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw UnknownNode("unknown node '" + id.str() + "'");
  return {it->second.children.begin(), it->second.children.end()};
}

std::size_t Federation::redirector_count() const {
  std::shared_lock lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, node] : nodes_) n += node.kind == FederationKind::redirector ? 1 : 0;
  return n;
}

}  // namespace backbone_cdn
