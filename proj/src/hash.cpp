#include "premise/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstring>
#include <stdexcept>

#include "premise/error.hpp"

namespace premise {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::schema_violation: return "schema_violation";
    case ErrorCode::dangling_premise: return "dangling_premise";
    case ErrorCode::import_cycle: return "import_cycle";
    case ErrorCode::unknown_module: return "unknown_module";
    case ErrorCode::lint_failure: return "lint_failure";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::unknown_name: return "unknown_name";
    case ErrorCode::conflicting_duplicate: return "conflicting_duplicate";
    case ErrorCode::empty_corpus: return "empty_corpus";
    case ErrorCode::non_finite_loss: return "non_finite_loss";
    case ErrorCode::unknown_snapshot: return "unknown_snapshot";
    case ErrorCode::malformed_request: return "malformed_request";
    case ErrorCode::request_too_large: return "request_too_large";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

struct ContentHasher::Impl {
  EVP_MD_CTX* ctx = nullptr;
};

ContentHasher::ContentHasher() : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_MD_CTX_new();
  if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
}

ContentHasher::~ContentHasher() { EVP_MD_CTX_free(impl_->ctx); }

ContentHasher& ContentHasher::bytes(const void* data, std::size_t size) {
  EVP_DigestUpdate(impl_->ctx, data, size);
  return *this;
}

ContentHasher& ContentHasher::str(std::string_view s) {
  u64(s.size());
  return bytes(s.data(), s.size());
}

ContentHasher& ContentHasher::u64(std::uint64_t v) {
  std::array<unsigned char, 8> le{};
  for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(v >> (8 * i));
  return bytes(le.data(), le.size());
}

ContentHasher& ContentHasher::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return u64(bits);
}

std::string ContentHasher::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, md.data(), &len);
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < 16 && i < len; ++i) {
    out.push_back(kDigits[md[i] >> 4]);
    out.push_back(kDigits[md[i] & 0xf]);
  }
  return out;
}

std::string content_hash(std::string_view data) {
  ContentHasher h;
  h.bytes(data.data(), data.size());
  return h.hex();
}

std::uint64_t stable_hash64(std::string_view data) {
  const std::string hex = content_hash(data);
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

}  // namespace premise
