#include "backbone_cdn/deployment.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace backbone_cdn {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(where + ": unknown field '" + key + "'");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + ": missing field '" + key + "'");
  return *it;
}

std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected string");
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected number");
  return v.get<double>();
}

std::uint64_t get_u64(const json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ParseError(where + ": expected non-negative integer");
  }
  return v.get<std::uint64_t>();
}

NodeId make_node_id(const json& v, const std::string& where) {
  const std::string s = get_string(v, where);
  if (!NodeId::is_valid(s)) throw ValidationError(where + ": invalid node id '" + s + "'");
  return NodeId(s);
}

CacheConfig parse_cache_config(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected object");
  reject_unknown(obj, {"capacity", "high_watermark", "low_watermark", "block_size", "mode", "ttl_ms"}, where);
  CacheConfig cfg;
  cfg.capacity = get_u64(require(obj, "capacity", where), where + ".capacity");
  if (obj.contains("high_watermark")) cfg.high_watermark = get_number(obj["high_watermark"], where + ".high_watermark");
  if (obj.contains("low_watermark")) cfg.low_watermark = get_number(obj["low_watermark"], where + ".low_watermark");
  if (obj.contains("block_size")) cfg.block_size = get_u64(obj["block_size"], where + ".block_size");
  if (obj.contains("mode")) {
    const std::string mode = get_string(obj["mode"], where + ".mode");
    if (mode == "immutable") {
      cfg.mode = FreshnessMode::immutable;
    } else if (mode == "ttl") {
      cfg.mode = FreshnessMode::ttl;
    } else {
      throw ValidationError(where + ".mode: expected 'immutable' or 'ttl', got '" + mode + "'");
    }
  }
  if (obj.contains("ttl_ms")) {
    if (cfg.mode != FreshnessMode::ttl) throw ValidationError(where + ".ttl_ms: only valid with mode 'ttl'");
    cfg.ttl_ms = static_cast<std::int64_t>(get_u64(obj["ttl_ms"], where + ".ttl_ms"));
  }
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return cfg;
}

json cache_config_json(const CacheConfig& cfg) {
  json j = json::object();
  j["capacity"] = cfg.capacity;
  j["high_watermark"] = cfg.high_watermark;
  j["low_watermark"] = cfg.low_watermark;
  j["block_size"] = cfg.block_size;
  j["mode"] = cfg.mode == FreshnessMode::ttl ? "ttl" : "immutable";
  if (cfg.mode == FreshnessMode::ttl) j["ttl_ms"] = cfg.ttl_ms;
  return j;
}

}  // namespace

void CacheConfig::validate(std::uint64_t min_block_size) const {
  if (block_size == 0 || (block_size & (block_size - 1)) != 0) {
    throw ValidationError("block_size " + std::to_string(block_size) + " is not a power of two");
  }
  if (block_size < min_block_size) {
    throw ValidationError("block_size " + std::to_string(block_size) + " below " + std::to_string(min_block_size));
  }
  if (capacity < block_size) throw ValidationError("capacity smaller than block_size");
  if (!(high_watermark > 0.0 && high_watermark <= 1.0)) throw ValidationError("high_watermark outside (0, 1]");
  if (!(low_watermark > 0.0 && low_watermark < high_watermark)) {
    throw ValidationError("low_watermark outside (0, high_watermark)");
  }
  if (mode == FreshnessMode::ttl && ttl_ms <= 0) throw ValidationError("ttl mode requires ttl_ms > 0");
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::origin: return "origin";
    case Role::redirector: return "redirector";
    case Role::cache: return "cache";
    case Role::client: return "client";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view text) {
  for (Role r : {Role::origin, Role::redirector, Role::cache, Role::client}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

const NodeSpec* DeploymentConfig::find(const NodeId& id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const NodeSpec& DeploymentConfig::at(const NodeId& id) const {
  const NodeSpec* n = find(id);
  if (n == nullptr) throw UnknownNode("unknown node '" + id.str() + "'");
  return *n;
}

std::vector<const NodeSpec*> DeploymentConfig::with_role(Role role) const {
  std::vector<const NodeSpec*> out;
  for (const auto& n : nodes) {
    if (n.role == role) out.push_back(&n);
  }
  return out;
}

const NodeSpec& DeploymentConfig::root() const {
  for (const auto& n : nodes) {
    if (n.role == Role::redirector && !n.parent) return n;
  }
  throw ValidationError("federation has no root redirector");
}

NodeId DeploymentConfig::entry_redirector(const NodeId& cache) const {
  const NodeSpec& n = at(cache);
  return n.parent ? *n.parent : root().id;
}

void DeploymentConfig::validate() const {
  std::set<NodeId> seen;
  for (const auto& n : nodes) {
    if (!seen.insert(n.id).second) throw ValidationError("duplicate node id '" + n.id.str() + "'");
  }

  for (const auto& n : nodes) {
    const std::string where = "node '" + n.id.str() + "'";
    if ((n.role == Role::cache || n.role == Role::client) && !n.geo) {
      throw ValidationError(where + ": missing lat/lon");
    }
    if (!n.parent) continue;
    const NodeSpec* p = find(*n.parent);
    if (p == nullptr) throw ValidationError(where + ": unknown parent '" + n.parent->str() + "'");
    if (n.role == Role::client) throw ValidationError(where + ": clients take no parent");
    if (p->role != Role::redirector) {
      throw ValidationError(where + ": parent '" + p->id.str() + "' is not a redirector");
    }
  }

  // Cycles first, so a cyclic document is reported as such rather than as rootless.
  for (const auto& n : nodes) {
    if (n.role != Role::origin && n.role != Role::redirector) continue;
    std::vector<NodeId> chain{n.id};
    const NodeSpec* cur = &n;
    while (cur->parent) {
      const NodeId& next = *cur->parent;
      auto hit = std::find(chain.begin(), chain.end(), next);
      if (hit != chain.end()) {
        std::string path;
        for (auto it = hit; it != chain.end(); ++it) path += it->str() + " -> ";
        throw ValidationError("federation cycle: " + path + next.str());
      }
      chain.push_back(next);
      cur = &at(next);
    }
  }

  std::vector<NodeId> roots;
  for (const auto& n : nodes) {
    if (n.role == Role::origin && !n.parent) {
      throw ValidationError("node '" + n.id.str() + "': origin has no parent redirector");
    }
    if (n.role == Role::redirector && !n.parent) roots.push_back(n.id);
  }
  if (roots.size() != 1) {
    std::string names;
    for (const auto& r : roots) names += " '" + r.str() + "'";
    throw ValidationError("federation must have exactly one root redirector, found " +
                          std::to_string(roots.size()) + names);
  }

  for (const auto& n : nodes) {
    if (n.role == Role::cache && !caches.contains(n.id)) {
      throw ValidationError("node '" + n.id.str() + "': missing entry in caches");
    }
  }
  for (const auto& [id, cfg] : caches) {
    const NodeSpec* n = find(id);
    if (n == nullptr || n->role != Role::cache) {
      throw ValidationError("caches: '" + id.str() + "' is not a cache node");
    }
    try {
      cfg.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("caches." + id.str() + ": " + e.what());
    }
  }

  std::set<FileId> files;
  for (const auto& e : catalog) {
    if (!files.insert(e.meta.id).second) {
      throw ValidationError("catalog: duplicate path '" + e.meta.id.path() + "'");
    }
    const NodeSpec* o = find(e.origin);
    if (o == nullptr || o->role != Role::origin) {
      throw ValidationError("catalog '" + e.meta.id.path() + "': '" + e.origin.str() + "' is not an origin");
    }
  }
}

DeploymentConfig parse_deployment(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("deployment: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("deployment: top level must be an object");
  reject_unknown(doc, {"nodes", "caches", "catalog"}, "deployment");

  DeploymentConfig cfg;
  const json& nodes = require(doc, "nodes", "deployment");
  if (!nodes.is_array()) throw ParseError("deployment.nodes: expected array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& n = nodes[i];
    std::string where = "nodes[" + std::to_string(i) + "]";
    if (!n.is_object()) throw ParseError(where + ": expected object");
    NodeSpec spec;
    spec.id = make_node_id(require(n, "id", where), where + ".id");
    where = "node '" + spec.id.str() + "'";
    reject_unknown(n, {"id", "role", "lat", "lon", "parent"}, where);
    const std::string role = get_string(require(n, "role", where), where + ".role");
    auto r = parse_role(role);
    if (!r) throw ValidationError(where + ": unknown role '" + role + "'");
    spec.role = *r;
    const bool has_lat = n.contains("lat");
    const bool has_lon = n.contains("lon");
    if (has_lat != has_lon) throw ValidationError(where + ": lat and lon must be given together");
    if (has_lat) {
      try {
        spec.geo = GeoPoint::make(get_number(n["lat"], where + ".lat"), get_number(n["lon"], where + ".lon"));
      } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
      }
    }
    if (n.contains("parent") && !n["parent"].is_null()) {
      spec.parent = make_node_id(n["parent"], where + ".parent");
    }
    cfg.nodes.push_back(std::move(spec));
  }

  if (doc.contains("caches")) {
    const json& caches = doc["caches"];
    if (!caches.is_object()) throw ParseError("deployment.caches: expected object");
    for (const auto& [key, value] : caches.items()) {
      if (!NodeId::is_valid(key)) throw ValidationError("caches: invalid node id '" + key + "'");
      cfg.caches.emplace(NodeId(key), parse_cache_config(value, "caches." + key));
    }
  }

  if (doc.contains("catalog")) {
    const json& catalog = doc["catalog"];
    if (!catalog.is_array()) throw ParseError("deployment.catalog: expected array");
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      const json& c = catalog[i];
      const std::string where = "catalog[" + std::to_string(i) + "]";
      if (!c.is_object()) throw ParseError(where + ": expected object");
      reject_unknown(c, {"path", "size", "seed", "origin"}, where);
      const std::string path = get_string(require(c, "path", where), where + ".path");
      if (!FileId::is_valid(path)) throw ValidationError(where + ": invalid path '" + path + "'");
      CatalogEntry entry;
      entry.meta = FileMeta::make(FileId(path), get_u64(require(c, "size", where), where + ".size"),
                                  get_u64(require(c, "seed", where), where + ".seed"));
      entry.origin = make_node_id(require(c, "origin", where), where + ".origin");
      cfg.catalog.push_back(std::move(entry));
    }
  }

  cfg.validate();
  return cfg;
}

std::string serialize_deployment(const DeploymentConfig& config) {
  json doc = json::object();
  json nodes = json::array();
  for (const auto& n : config.nodes) {
    json j = json::object();
    j["id"] = n.id.str();
    j["role"] = std::string(to_string(n.role));
    if (n.geo) {
      j["lat"] = n.geo->lat;
      j["lon"] = n.geo->lon;
    }
    if (n.parent) j["parent"] = n.parent->str();
    nodes.push_back(std::move(j));
  }
  doc["nodes"] = std::move(nodes);
  json caches = json::object();
  for (const auto& [id, cfg] : config.caches) caches[id.str()] = cache_config_json(cfg);
  doc["caches"] = std::move(caches);
  json catalog = json::array();
  for (const auto& e : config.catalog) {
    catalog.push_back({{"path", e.meta.id.path()},
                       {"size", e.meta.size},
                       {"seed", e.meta.gen_seed},
                       {"origin", e.origin.str()}});
  }
  doc["catalog"] = std::move(catalog);
  return doc.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DeploymentConfig load_deployment(const std::string& path) { return parse_deployment(read_file(path)); }

}  // namespace backbone_cdn
