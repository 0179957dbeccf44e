#pragma once

// Deterministic synthetic file content and its FNV-1a version hash.
//
// Byte i of a file generated from `seed` is
//   ((seed mod 2^32) * 31 + i * 131) mod 256
// so payloads of any size can be verified byte-exactly without storing them.

#include <cstdint>
#include <span>
#include <string>

#include "backbone_cdn/core.hpp"

namespace backbone_cdn {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint8_t gen_content_byte(std::uint64_t seed, std::uint64_t i) {
  // Only the low 8 bits of each product survive, so unsigned wraparound is harmless.
  const std::uint64_t s = seed & 0xffffffffULL;
  return static_cast<std::uint8_t>((s * 31U + i * 131U) & 0xffU);
}

/// Fills `out` with bytes [offset, offset + out.size()) of the file. OpenMP-parallel.
void fill_content(std::uint64_t seed, std::uint64_t offset, std::span<char> out);

/// Single-threaded reference for fill_content.
void fill_content_serial(std::uint64_t seed, std::uint64_t offset, std::span<char> out);

std::string make_content(std::uint64_t seed, std::uint64_t offset, std::uint64_t length);

/// FNV-1a 64 over an arbitrary byte buffer.
std::uint64_t fnv1a64(std::span<const char> bytes, std::uint64_t state = kFnvOffsetBasis);

/// FNV-1a 64 over the `size` generated bytes of `seed`.
std::uint64_t content_version(std::uint64_t seed, std::uint64_t size);

inline std::uint64_t content_version(const FileMeta& meta) {
  return content_version(meta.gen_seed, meta.size);
}

}  // namespace backbone_cdn
