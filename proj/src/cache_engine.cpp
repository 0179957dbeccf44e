#include "backbone_cdn/cache_engine.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>

namespace backbone_cdn {

namespace {

void bump_last_access(std::atomic<std::uint64_t>& slot, std::uint64_t tick) {
  std::uint64_t cur = slot.load(std::memory_order_relaxed);
  while (cur < tick && !slot.compare_exchange_weak(cur, tick, std::memory_order_relaxed)) {
  }
}

Classification classify(std::uint64_t from_cache, std::uint64_t from_origin) {
  if (from_origin == 0) return Classification::hit;
  if (from_cache == 0) return Classification::miss;
  return Classification::partial;
}

}  // namespace

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::hit: return "hit";
    case Classification::partial: return "partial";
    case Classification::miss: return "miss";
  }
  return "?";
}

CacheEngine::CacheEngine(CacheConfig config) : config_(config) { config_.validate(1); }

std::uint64_t CacheEngine::block_count(std::uint64_t size) const {
  return (size + config_.block_size - 1) / config_.block_size;
}

bool CacheEngine::expired(const Entry& e, std::int64_t now_ms) const {
  return config_.mode == FreshnessMode::ttl && now_ms - e.fetched_at >= config_.ttl_ms;
}

bool CacheEngine::try_fast_hit(const FileId& file, std::uint64_t offset, std::uint64_t length,
                               std::int64_t now_ms, ReadOutcome& out) {
  std::shared_lock lock(mu_);
  auto it = entries_.find(file);
  if (it == entries_.end()) return false;
  const Entry& e = it->second;
  if (expired(e, now_ms) || offset > e.size || length > e.size - offset) return false;
  const std::uint64_t bs = config_.block_size;
  const std::uint64_t end = offset + length;
  for (std::uint64_t b = offset / bs; length > 0 && b <= (end - 1) / bs; ++b) {
    if (!e.blocks[b].present) return false;
  }
  const std::uint64_t tick = tick_.fetch_add(1) + 1;
  out.data.assign(length, '\0');
  for (std::uint64_t b = offset / bs; length > 0 && b <= (end - 1) / bs; ++b) {
    const Block& blk = e.blocks[b];
    const std::uint64_t lo = std::max(offset, b * bs);
    const std::uint64_t hi = std::min(end, (b + 1) * bs);
    std::memcpy(out.data.data() + (lo - offset), blk.data.data() + (lo - b * bs), hi - lo);
    bump_last_access(blk.last_access, tick);
  }
  out.bytes_from_cache = length;
  out.bytes_from_origin = 0;
  out.classification = Classification::hit;
  out.file_size = e.size;
  out.version = e.version;
  return true;
}

void CacheEngine::install_entry(const FileId& file, const FileStat& stat, const NodeId& server,
                                std::int64_t now_ms) {
  if (rounded(stat.size) > config_.capacity) {
    throw FileTooLarge(file.path() + ": " + std::to_string(stat.size) + " bytes exceeds cache capacity " +
                       std::to_string(config_.capacity));
  }
  Entry& e = entries_[file];
  e.size = stat.size;
  e.version = stat.version;
  e.fetched_at = now_ms;
  e.generation = next_generation_++;
  e.server = server;
  e.lost_blocks = false;
  e.present = 0;
  e.blocks.clear();
  e.blocks.resize(block_count(stat.size));
}

void CacheEngine::drop_entry_locked(std::unordered_map<FileId, Entry>::iterator it) {
  used_ -= it->second.present * config_.block_size;
  entries_.erase(it);
}

ReadOutcome CacheEngine::read(const FileId& file, std::uint64_t offset, std::uint64_t length,
                              std::int64_t now_ms, Upstream& upstream) {
  ReadOutcome out;
  if (try_fast_hit(file, offset, length, now_ms, out)) return out;

  const std::uint64_t bs = config_.block_size;
  const std::uint64_t end = offset + length;
  if (end < offset) throw RangeError("range overflows");

  // Metadata: install, revalidate, or (after eviction) confirm the version
  // before mixing refetched blocks with surviving ones. Upstream calls are
  // made without holding the lock.
  for (int round = 0;; ++round) {
    enum class Need { none, install, revalidate } need = Need::none;
    std::optional<NodeId> server;
    std::uint64_t generation = 0;
    {
      std::shared_lock lock(mu_);
      auto it = entries_.find(file);
      if (it == entries_.end()) {
        need = Need::install;
      } else {
        const Entry& e = it->second;
        server = e.server;
        generation = e.generation;
        bool missing = false;
        if (e.lost_blocks && offset <= e.size && length <= e.size - offset) {
          for (std::uint64_t b = offset / bs; length > 0 && b <= (end - 1) / bs; ++b) {
            missing = missing || !e.blocks[b].present;
          }
        }
        if (expired(e, now_ms) || missing) need = Need::revalidate;
      }
    }
    if (need == Need::none || round >= 3) break;

    if (!server) server = upstream.locate(file);
    FileStat stat;
    try {
      stat = upstream.stat(*server, file);
    } catch (const NotFound&) {
      if (need != Need::revalidate) throw;
      // The remembered server lost the file; ask the federation again.
      server = upstream.locate(file);
      stat = upstream.stat(*server, file);
    }

    std::unique_lock lock(mu_);
    auto it = entries_.find(file);
    if (need == Need::install) {
      if (it == entries_.end()) install_entry(file, stat, *server, now_ms);
      continue;
    }
    if (it == entries_.end() || it->second.generation != generation) continue;
    if (it->second.version != stat.version || it->second.size != stat.size) {
      drop_entry_locked(it);
      install_entry(file, stat, *server, now_ms);
    } else {
      it->second.fetched_at = now_ms;
      it->second.lost_blocks = false;
      it->second.server = *server;
    }
  }

  struct Pending {
    std::uint64_t block;
    InflightKey key;
    std::promise<std::string> promise;
  };
  struct Waiting {
    std::uint64_t block;
    std::shared_future<std::string> future;
  };
  std::vector<Pending> leaders;
  std::vector<Waiting> waiters;
  NodeId server;
  std::uint64_t generation = 0;
  std::uint64_t size = 0;
  std::uint64_t tick = 0;

  auto copy_block = [&](std::uint64_t b, const std::string& data) {
    const std::uint64_t lo = std::max(offset, b * bs);
    const std::uint64_t hi = std::min(end, (b + 1) * bs);
    std::memcpy(out.data.data() + (lo - offset), data.data() + (lo - b * bs), hi - lo);
    return hi - lo;
  };

  {
    std::unique_lock lock(mu_);
    auto it = entries_.find(file);
    if (it == entries_.end()) {
      // Evicted between phases by a concurrent request; start over.
      lock.unlock();
      return read(file, offset, length, now_ms, upstream);
    }
    Entry& e = it->second;
    if (offset > e.size || length > e.size - offset) {
      throw RangeError(file.path() + ": range [" + std::to_string(offset) + ", " + std::to_string(end) +
                       ") outside file of " + std::to_string(e.size) + " bytes");
    }
    server = *e.server;
    generation = e.generation;
    size = e.size;
    out.file_size = e.size;
    out.version = e.version;
    out.data.assign(length, '\0');
    tick = tick_.fetch_add(1) + 1;
    for (std::uint64_t b = offset / bs; length > 0 && b <= (end - 1) / bs; ++b) {
      Block& blk = e.blocks[b];
      if (blk.present) {
        out.bytes_from_cache += copy_block(b, blk.data);
        bump_last_access(blk.last_access, tick);
        continue;
      }
      InflightKey key{file, generation, b};
      if (auto f = inflight_.find(key); f != inflight_.end()) {
        waiters.push_back({b, f->second});
      } else {
        Pending p{b, key, {}};
        inflight_.emplace(key, p.promise.get_future().share());
        leaders.push_back(std::move(p));
      }
    }
  }

  std::vector<BlockRef> fetched;
  std::exception_ptr failure;
  for (auto& p : leaders) {
    if (!failure) {
      const std::uint64_t block_off = p.block * bs;
      const std::uint64_t block_len = std::min(bs, size - block_off);
      try {
        std::string data = upstream.read(server, file, block_off, block_len);
        if (data.size() != block_len) {
          throw OriginUnavailable(file.path() + ": short block read from '" + server.str() + "'");
        }
        out.bytes_from_origin += copy_block(p.block, data);
        std::unique_lock lock(mu_);
        fetched.push_back({file, p.block});
        try {
          store_block(p.key, data, tick, fetched, out.evicted);
        } catch (...) {
          inflight_.erase(p.key);
          throw;
        }
        inflight_.erase(p.key);
        lock.unlock();
        p.promise.set_value(std::move(data));
        continue;
      } catch (...) {
        failure = std::current_exception();
      }
    }
    {
      std::unique_lock lock(mu_);
      inflight_.erase(p.key);
    }
    p.promise.set_exception(failure);
  }
  for (auto& w : waiters) {
    try {
      out.bytes_from_cache += copy_block(w.block, w.future.get());
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  out.classification = classify(out.bytes_from_cache, out.bytes_from_origin);
  return out;
}

bool CacheEngine::store_block(const InflightKey& key, std::string data, std::uint64_t tick,
                              const std::vector<BlockRef>& protect, std::vector<BlockRef>& evicted) {
  auto it = entries_.find(key.file);
  if (it == entries_.end() || it->second.generation != key.generation) return false;
  if (it->second.blocks[key.block].present) return false;

  const double cap = static_cast<double>(config_.capacity);
  // Make room first so usage never exceeds capacity, even transiently.
  if (used_ + config_.block_size > config_.capacity) {
    auto v = evict_locked(protect);
    evicted.insert(evicted.end(), v.begin(), v.end());
    if (used_ + config_.block_size > config_.capacity) {
      throw FileTooLarge(key.file.path() + ": request does not fit in the cache");
    }
  }
  // Eviction never drops an entry with fetches in flight, so `it` is still valid.
  Entry& e = entries_.at(key.file);
  Block& blk = e.blocks[key.block];
  blk.data = std::move(data);
  blk.present = true;
  blk.last_access.store(tick);
  ++e.present;
  used_ += config_.block_size;
  if (static_cast<double>(used_) > config_.high_watermark * cap) {
    auto v = evict_locked(protect);
    evicted.insert(evicted.end(), v.begin(), v.end());
  }
  return true;
}

std::vector<BlockRef> CacheEngine::evict_locked(const std::vector<BlockRef>& protect) {
  const double limit = config_.low_watermark * static_cast<double>(config_.capacity);
  std::vector<BlockRef> victims;
  if (static_cast<double>(used_) <= limit) return victims;

  struct Candidate {
    std::uint64_t last_access;
    const FileId* file;
    std::uint64_t block;
  };
  std::vector<Candidate> all;
  for (auto& [id, e] : entries_) {
    for (std::uint64_t b = 0; b < e.blocks.size(); ++b) {
      if (!e.blocks[b].present) continue;
      if (std::find(protect.begin(), protect.end(), BlockRef{id, b}) != protect.end()) continue;
      all.push_back({e.blocks[b].last_access.load(), &id, b});
    }
  }
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    if (a.last_access != b.last_access) return a.last_access < b.last_access;
    if (*a.file != *b.file) return *a.file < *b.file;
    return a.block < b.block;
  });

  std::vector<FileId> emptied;
  for (const auto& c : all) {
    if (static_cast<double>(used_) <= limit) break;
    Entry& e = entries_.at(*c.file);
    Block& blk = e.blocks[c.block];
    blk.present = false;
    blk.data.clear();
    blk.data.shrink_to_fit();
    --e.present;
    e.lost_blocks = true;
    used_ -= config_.block_size;
    victims.push_back({*c.file, c.block});
    if (e.present == 0) emptied.push_back(*c.file);
  }
  for (const auto& id : emptied) {
    auto it = entries_.find(id);
    if (it == entries_.end() || it->second.present != 0) continue;
    auto f = inflight_.lower_bound(InflightKey{id, it->second.generation, 0});
    const bool busy = f != inflight_.end() && f->first.file == id && f->first.generation == it->second.generation;
    if (!busy) entries_.erase(it);
  }
  return victims;
}

std::vector<BlockRef> CacheEngine::evict(std::int64_t /*now_ms*/) {
  std::unique_lock lock(mu_);
  if (static_cast<double>(used_) <= config_.high_watermark * static_cast<double>(config_.capacity)) return {};
  return evict_locked({});
}

std::uint64_t CacheEngine::purge(const FileId& file) {
  std::unique_lock lock(mu_);
  auto it = entries_.find(file);
  if (it == entries_.end()) return 0;
  const std::uint64_t freed = it->second.present * config_.block_size;
  drop_entry_locked(it);
  return freed;
}

Freshness CacheEngine::refresh_check(const FileId& file, std::int64_t now_ms, Upstream& upstream) {
  if (config_.mode == FreshnessMode::immutable) return Freshness::fresh;
  std::optional<NodeId> server;
  std::uint64_t version = 0;
  {
    std::shared_lock lock(mu_);
    auto it = entries_.find(file);
    if (it == entries_.end()) throw NotFound(file.path() + ": not cached");
    if (!expired(it->second, now_ms)) return Freshness::fresh;
    server = it->second.server;
    version = it->second.version;
  }
  if (!server) server = upstream.locate(file);
  return upstream.stat(*server, file).version == version ? Freshness::fresh : Freshness::stale;
}

CacheStats CacheEngine::stats() const {
  std::shared_lock lock(mu_);
  CacheStats s;
  s.used = used_;
  s.entries = entries_.size();
  for (const auto& [_, e] : entries_) s.blocks += e.present;
  s.tick = tick_.load();
  return s;
}

std::vector<BlockInfo> CacheEngine::blocks() const {
  std::shared_lock lock(mu_);
  std::vector<BlockInfo> out;
  for (const auto& [id, e] : entries_) {
    for (std::uint64_t b = 0; b < e.blocks.size(); ++b) {
      if (e.blocks[b].present) out.push_back({id, b, e.blocks[b].last_access.load()});
    }
  }
  std::sort(out.begin(), out.end(), [](const BlockInfo& a, const BlockInfo& b) {
    return std::tie(a.file, a.block) < std::tie(b.file, b.block);
  });
  return out;
}

std::optional<FileStat> CacheEngine::cached_stat(const FileId& file) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(file);
  if (it == entries_.end()) return std::nullopt;
  return FileStat{it->second.size, it->second.version};
}

}  // namespace backbone_cdn
