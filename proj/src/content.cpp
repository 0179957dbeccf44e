#include "backbone_cdn/content.hpp"

#include <array>
#include <algorithm>
#include <cstddef>

namespace backbone_cdn {

namespace {

// Below this many bytes the thread fan-out costs more than the loop.
constexpr std::size_t kParallelThreshold = 1 << 16;

}  // namespace

void fill_content(std::uint64_t seed, std::uint64_t offset, std::span<char> out) {
  const auto n = static_cast<std::int64_t>(out.size());
  char* data = out.data();
#pragma omp parallel for schedule(static) if (out.size() >= kParallelThreshold)
  for (std::int64_t k = 0; k < n; ++k) {
    data[k] = static_cast<char>(gen_content_byte(seed, offset + static_cast<std::uint64_t>(k)));
  }
}

void fill_content_serial(std::uint64_t seed, std::uint64_t offset, std::span<char> out) {
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<char>(gen_content_byte(seed, offset + k));
  }
}

std::string make_content(std::uint64_t seed, std::uint64_t offset, std::uint64_t length) {
  std::string buf(length, '\0');
  fill_content(seed, offset, buf);
  return buf;
}

std::uint64_t fnv1a64(std::span<const char> bytes, std::uint64_t state) {
  for (char c : bytes) {
    state ^= static_cast<std::uint8_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

std::uint64_t content_version(std::uint64_t seed, std::uint64_t size) {
  // The hash is inherently sequential; generate in chunks to bound memory.
  std::array<char, 1 << 16> chunk{};
  std::uint64_t state = kFnvOffsetBasis;
  for (std::uint64_t off = 0; off < size; off += chunk.size()) {
    const auto len = static_cast<std::size_t>(std::min<std::uint64_t>(chunk.size(), size - off));
    std::span<char> view(chunk.data(), len);
    fill_content_serial(seed, off, view);
    state = fnv1a64(view, state);
  }
  return state;
}

}  // namespace backbone_cdn
