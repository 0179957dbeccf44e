#pragma once

// Test fixtures and independent reference models. Nothing here calls the
// library code it is used to check.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "backbone_cdn/accounting.hpp"
#include "backbone_cdn/cache_engine.hpp"
#include "backbone_cdn/content.hpp"
#include "backbone_cdn/deployment.hpp"

namespace fixtures {

namespace bc = backbone_cdn;

// Byte formula written out again rather than calling gen_content_byte.
inline unsigned char ref_byte(std::uint64_t seed, std::uint64_t i) {
  return static_cast<unsigned char>(((seed & 0xffffffffULL) * 31 + i * 131) % 256);
}

inline std::string ref_content(std::uint64_t seed, std::uint64_t offset, std::uint64_t length) {
  std::string s(length, '\0');
  for (std::uint64_t k = 0; k < length; ++k) s[k] = static_cast<char>(ref_byte(seed, offset + k));
  return s;
}

inline std::uint64_t ref_fnv(std::uint64_t seed, std::uint64_t size) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::uint64_t i = 0; i < size; ++i) {
    h ^= ref_byte(seed, i);
    h *= 1099511628211ULL;
  }
  return h;
}

/// In-memory federation + data server for driving CacheEngine directly.
class MapUpstream final : public bc::Upstream {
 public:
  struct File {
    std::uint64_t size;
    std::uint64_t seed;
  };

  void put(const std::string& path, std::uint64_t size, std::uint64_t seed) {
    files[bc::FileId(path)] = File{size, seed};
  }

  bc::NodeId locate(const bc::FileId& file) override {
    ++locates;
    if (down) throw bc::OriginUnavailable("down");
    if (!files.contains(file)) throw bc::NotFound(file.path());
    return bc::NodeId("origin");
  }
  bc::FileStat stat(const bc::NodeId&, const bc::FileId& file) override {
    ++stats;
    if (down) throw bc::OriginUnavailable("down");
    auto it = files.find(file);
    if (it == files.end()) throw bc::NotFound(file.path());
    return {it->second.size, ref_fnv(it->second.seed, it->second.size)};
  }
  std::string read(const bc::NodeId&, const bc::FileId& file, std::uint64_t offset, std::uint64_t length) override {
    ++reads;
    if (down) throw bc::OriginUnavailable("down");
    auto it = files.find(file);
    if (it == files.end()) throw bc::NotFound(file.path());
    bytes += length;
    return ref_content(it->second.seed, offset, length);
  }

  std::map<bc::FileId, File> files;
  bool down = false;
  int locates = 0;
  int stats = 0;
  int reads = 0;
  std::uint64_t bytes = 0;
};

/// Block-level LRU reference: sort every unprotected present block by
/// (last_access, file, block) and cut until usage reaches the low watermark.
class LruModel {
 public:
  using Key = std::pair<std::string, std::uint64_t>;

  LruModel(std::uint64_t capacity, double high, double low, std::uint64_t block)
      : capacity_(capacity), high_(high), low_(low), block_(block) {}

  /// Returns the blocks evicted by a full read of [offset, offset+length).
  std::vector<Key> read(const std::string& file, std::uint64_t size, std::uint64_t offset, std::uint64_t length) {
    std::vector<Key> victims;
    ++tick_;  // every read takes a tick, even an empty one
    if (length == 0) return victims;
    // Blocks already present are served, and touched, before any fetch.
    std::vector<Key> missing;
    for (std::uint64_t b = offset / block_; b <= (offset + length - 1) / block_; ++b) {
      const Key k{file, b};
      auto it = present_.find(k);
      if (it != present_.end()) {
        it->second = tick_;
      } else {
        missing.push_back(k);
      }
    }
    std::set<Key> fetched;
    for (const Key& k : missing) {
      fetched.insert(k);
      if (used() + block_ > capacity_) cut(fetched, victims);
      present_[k] = tick_;
      if (static_cast<double>(used()) > high_ * static_cast<double>(capacity_)) cut(fetched, victims);
    }
    (void)size;
    return victims;
  }

  std::uint64_t used() const { return present_.size() * block_; }
  const std::map<Key, std::uint64_t>& present() const { return present_; }

 private:
  void cut(const std::set<Key>& protect, std::vector<Key>& victims) {
    const double limit = low_ * static_cast<double>(capacity_);
    std::vector<std::tuple<std::uint64_t, std::string, std::uint64_t>> order;
    for (const auto& [k, t] : present_) {
      if (!protect.contains(k)) order.emplace_back(t, k.first, k.second);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [t, f, b] : order) {
      if (static_cast<double>(used()) <= limit) break;
      present_.erase({f, b});
      victims.push_back({f, b});
    }
  }

  std::uint64_t capacity_;
  double high_;
  double low_;
  std::uint64_t block_;
  std::uint64_t tick_ = 0;
  std::map<Key, std::uint64_t> present_;
};

/// Random federation tree: `redirectors` redirectors (r0 is the root) and
/// data servers hung under random redirectors.
struct RandomTree {
  std::vector<std::string> redirectors;
  std::vector<std::string> servers;
  std::map<std::string, std::optional<std::string>> parent;
  std::map<std::string, std::set<std::string>> holdings;  // server -> files
};

inline RandomTree random_tree(std::mt19937_64& rng, int max_nodes, int files) {
  std::uniform_int_distribution<int> total_d(2, max_nodes);
  const int total = total_d(rng);
  std::uniform_int_distribution<int> red_d(1, std::max(1, total / 2));
  const int nred = std::min(red_d(rng), total - 1);
  RandomTree t;
  // Shuffled numeric suffixes so ascending-id order differs from insertion order.
  std::vector<int> ids(total);
  for (int i = 0; i < total; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  for (int i = 0; i < nred; ++i) {
    const std::string id = "r" + std::to_string(ids[i]);
    if (i == 0) {
      t.parent[id] = std::nullopt;
    } else {
      std::uniform_int_distribution<int> p(0, i - 1);
      t.parent[id] = t.redirectors[p(rng)];
    }
    t.redirectors.push_back(id);
  }
  for (int i = nred; i < total; ++i) {
    const std::string id = "s" + std::to_string(ids[i]);
    std::uniform_int_distribution<int> p(0, nred - 1);
    t.parent[id] = t.redirectors[p(rng)];
    t.servers.push_back(id);
    std::bernoulli_distribution holds(0.15);
    for (int f = 0; f < files; ++f) {
      if (holds(rng)) t.holdings[id].insert("/ns/f" + std::to_string(f));
    }
  }
  return t;
}

/// Brute force over every holder: the winner is the holder whose lowest
/// common ancestor with the entry is nearest the entry, then the one whose
/// id path down from that ancestor sorts first.
inline std::optional<std::string> oracle_locate(const RandomTree& t, const std::string& entry,
                                                const std::string& file) {
  std::vector<std::string> up{entry};
  while (auto p = t.parent.at(up.back())) up.push_back(*p);

  std::optional<std::tuple<std::size_t, std::vector<std::string>, std::string>> best;
  for (const auto& [server, files] : t.holdings) {
    if (!files.contains(file)) continue;
    std::vector<std::string> chain{server};
    while (auto p = t.parent.at(chain.back())) chain.push_back(*p);
    for (std::size_t level = 0; level < up.size(); ++level) {
      auto at = std::find(chain.begin(), chain.end(), up[level]);
      if (at == chain.end()) continue;
      std::vector<std::string> path(chain.begin(), at);
      std::reverse(path.begin(), path.end());
      auto cand = std::make_tuple(level, path, server);
      if (!best || cand < *best) best = cand;
      break;
    }
  }
  if (!best) return std::nullopt;
  return std::get<2>(*best);
}

inline bc::AccessRecord record(std::int64_t t, const std::string& path, std::uint64_t size, std::uint64_t read,
                               std::uint64_t from_cache, const std::string& cache = "k1") {
  bc::AccessRecord r;
  r.t_ms = t;
  r.client = bc::NodeId("c1");
  if (!cache.empty()) r.cache = bc::NodeId(cache);
  r.file = bc::FileId(path);
  r.file_size = size;
  r.bytes_read = read;
  r.bytes_from_cache = from_cache;
  r.bytes_from_origin = read - from_cache;
  return r;
}

/// Two-pass reference aggregation: collect namespaces, then sum each one.
inline std::vector<bc::NamespaceReport> naive_report(const std::vector<bc::AccessRecord>& log, std::int64_t t0,
                                                     std::int64_t t1) {
  std::set<std::string> namespaces;
  for (const auto& r : log) {
    if (r.cache && r.t_ms >= t0 && r.t_ms < t1) namespaces.insert(std::string(r.file.ns()));
  }
  std::vector<bc::NamespaceReport> out;
  for (const auto& ns : namespaces) {
    bc::NamespaceReport rep;
    rep.ns = ns;
    std::map<std::string, std::uint64_t> sizes;
    for (const auto& r : log) {
      if (!r.cache || r.t_ms < t0 || r.t_ms >= t1 || r.file.ns() != ns) continue;
      rep.data_read_bytes += r.bytes_read;
      rep.hits_bytes += r.bytes_from_cache;
      rep.misses_bytes += r.bytes_from_origin;
      rep.origin_bytes += r.bytes_from_origin;
      auto& s = sizes[r.file.path()];
      s = std::max(s, r.file_size);
    }
    for (const auto& [_, s] : sizes) rep.working_set_bytes += s;
    out.push_back(rep);
  }
  return out;
}

/// One redirector, one origin, the given caches (id, lat, lon) and clients.
inline bc::DeploymentConfig star_deployment(const std::vector<std::tuple<std::string, double, double>>& caches,
                                            const std::vector<std::tuple<std::string, double, double>>& clients,
                                            const bc::CacheConfig& cache_config) {
  bc::DeploymentConfig d;
  d.nodes.push_back({bc::NodeId("root"), bc::Role::redirector, std::nullopt, std::nullopt});
  d.nodes.push_back({bc::NodeId("origin"), bc::Role::origin, std::nullopt, bc::NodeId("root")});
  for (const auto& [id, lat, lon] : caches) {
    d.nodes.push_back({bc::NodeId(id), bc::Role::cache, bc::GeoPoint::make(lat, lon), std::nullopt});
    d.caches.emplace(bc::NodeId(id), cache_config);
  }
  for (const auto& [id, lat, lon] : clients) {
    d.nodes.push_back({bc::NodeId(id), bc::Role::client, bc::GeoPoint::make(lat, lon), std::nullopt});
  }
  return d;
}

}  // namespace fixtures
