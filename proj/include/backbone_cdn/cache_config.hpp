#pragma once

#include <cstdint>

namespace backbone_cdn {

enum class FreshnessMode {
  immutable,  // write once, read many: never revalidated until purged
  ttl,        // write few, read many: revalidated after ttl_ms
};

struct CacheConfig {
  std::uint64_t capacity = 0;
  double high_watermark = 0.95;
  double low_watermark = 0.90;
  std::uint64_t block_size = 1ULL << 20;
  FreshnessMode mode = FreshnessMode::immutable;
  std::int64_t ttl_ms = 0;

  /// Checks every field. `min_block_size` is 1024 for deployment documents;
  /// the engine itself accepts any power of two so small unit fixtures work.
  void validate(std::uint64_t min_block_size = 1024) const;

  friend bool operator==(const CacheConfig&, const CacheConfig&) = default;
};

}  // namespace backbone_cdn
