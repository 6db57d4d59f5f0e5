#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace premise {

// Incremental SHA-256. Strings are length-prefixed so that field
// boundaries are part of the digest.
class ContentHasher {
 public:
  ContentHasher();
  ~ContentHasher();
  ContentHasher(const ContentHasher&) = delete;
  ContentHasher& operator=(const ContentHasher&) = delete;

  ContentHasher& bytes(const void* data, std::size_t size);
  ContentHasher& str(std::string_view s);
  ContentHasher& u64(std::uint64_t v);
  ContentHasher& f64(double v);
  template <typename T>
  ContentHasher& values(std::span<const T> v) {
    u64(v.size());
    return bytes(v.data(), v.size_bytes());
  }

  // Hex digest truncated to 32 characters (128 bits).
  std::string hex();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string content_hash(std::string_view data);

// First 64 bits of the SHA-256 digest; stable across runs and platforms.
std::uint64_t stable_hash64(std::string_view data);

}  // namespace premise
