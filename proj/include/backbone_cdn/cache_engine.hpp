#pragma once

// Fetch-through block cache.
//
// Files are cached in fixed-size blocks. A read serves present blocks from
// memory and fetches the rest from the data server the federation names.
// Capacity is charged per block (a file's short last block costs a full
// block). When usage crosses the high watermark, least-recently-used blocks
// are dropped until usage is at or below the low watermark.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "backbone_cdn/cache_config.hpp"
#include "backbone_cdn/core.hpp"

namespace backbone_cdn {

/// Transport failure while talking to the federation or a data server.
class OriginUnavailable : public Error {
 public:
  using Error::Error;
};

/// The file cannot fit in the cache even when it is otherwise empty.
class FileTooLarge : public Error {
 public:
  using Error::Error;
};

struct FileStat {
  std::uint64_t size = 0;
  std::uint64_t version = 0;
};

/// How the cache reaches the federation. Implementations throw NotFound when
/// no server holds the file and OriginUnavailable on transport failure.
class Upstream {
 public:
  virtual ~Upstream() = default;
  virtual NodeId locate(const FileId& file) = 0;
  virtual FileStat stat(const NodeId& server, const FileId& file) = 0;
  virtual std::string read(const NodeId& server, const FileId& file, std::uint64_t offset,
                           std::uint64_t length) = 0;
};

enum class Classification { hit, partial, miss };
enum class Freshness { fresh, stale };

std::string_view to_string(Classification c);

struct BlockRef {
  FileId file;
  std::uint64_t block = 0;

  friend auto operator<=>(const BlockRef&, const BlockRef&) = default;
  friend bool operator==(const BlockRef&, const BlockRef&) = default;
};

struct BlockInfo {
  FileId file;
  std::uint64_t block = 0;
  std::uint64_t last_access = 0;
};

struct ReadOutcome {
  std::string data;
  std::uint64_t bytes_from_cache = 0;
  std::uint64_t bytes_from_origin = 0;
  Classification classification = Classification::hit;
  std::uint64_t file_size = 0;
  std::uint64_t version = 0;
  std::vector<BlockRef> evicted;  // blocks dropped while serving this read
};

struct CacheStats {
  std::uint64_t used = 0;
  std::uint64_t entries = 0;
  std::uint64_t blocks = 0;
  std::uint64_t tick = 0;

  friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

class CacheEngine {
 public:
  /// Accepts any power-of-two block size; throws ValidationError otherwise.
  explicit CacheEngine(CacheConfig config);

  CacheEngine(const CacheEngine&) = delete;
  CacheEngine& operator=(const CacheEngine&) = delete;

  /// Throws NotFound, OriginUnavailable, RangeError or FileTooLarge.
  ReadOutcome read(const FileId& file, std::uint64_t offset, std::uint64_t length, std::int64_t now_ms,
                   Upstream& upstream);

  /// Watermark eviction with nothing protected.
  std::vector<BlockRef> evict(std::int64_t now_ms);

  /// Drops every block and the metadata of `file`; returns the bytes freed.
  std::uint64_t purge(const FileId& file);

  /// Always fresh in immutable mode. In ttl mode, stale iff the entry is at
  /// least ttl_ms old and the origin's version differs. Does not modify state.
  Freshness refresh_check(const FileId& file, std::int64_t now_ms, Upstream& upstream);

  CacheStats stats() const;
  std::vector<BlockInfo> blocks() const;
  std::optional<FileStat> cached_stat(const FileId& file) const;
  const CacheConfig& config() const { return config_; }

 private:
  struct Block {
    std::string data;
    bool present = false;
    mutable std::atomic<std::uint64_t> last_access{0};
  };
  struct Entry {
    std::uint64_t size = 0;
    std::uint64_t version = 0;
    std::int64_t fetched_at = 0;
    std::uint64_t generation = 0;
    std::optional<NodeId> server;
    bool lost_blocks = false;  // some blocks were evicted since the metadata was fetched
    std::uint64_t present = 0;
    std::deque<Block> blocks;
  };
  struct InflightKey {
    FileId file;
    std::uint64_t generation;
    std::uint64_t block;
    friend auto operator<=>(const InflightKey&, const InflightKey&) = default;
  };

  std::uint64_t block_count(std::uint64_t size) const;
  std::uint64_t rounded(std::uint64_t size) const { return block_count(size) * config_.block_size; }
  bool expired(const Entry& e, std::int64_t now_ms) const;
  bool try_fast_hit(const FileId& file, std::uint64_t offset, std::uint64_t length, std::int64_t now_ms,
                    ReadOutcome& out);
  void install_entry(const FileId& file, const FileStat& stat, const NodeId& server, std::int64_t now_ms);
  void drop_entry_locked(std::unordered_map<FileId, Entry>::iterator it);
  // Drops LRU blocks outside `protect` until usage is at or below the low watermark.
  std::vector<BlockRef> evict_locked(const std::vector<BlockRef>& protect);
  bool store_block(const InflightKey& key, std::string data, std::uint64_t tick,
                   const std::vector<BlockRef>& protect, std::vector<BlockRef>& evicted);

  const CacheConfig config_;
  mutable std::shared_mutex mu_;
  std::unordered_map<FileId, Entry> entries_;
  std::uint64_t used_ = 0;
  std::uint64_t next_generation_ = 1;
  std::atomic<std::uint64_t> tick_{0};

  // Single-flight: concurrent misses on one block share one upstream fetch.
  std::map<InflightKey, std::shared_future<std::string>> inflight_;
};

}  // namespace backbone_cdn
