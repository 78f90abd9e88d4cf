#pragma once

#include <array>
#include <memory>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpb {

using Bytes = std::vector<uint8_t>;
using Block16 = std::array<uint8_t, 16>;
using Digest32 = std::array<uint8_t, 32>;

struct CryptoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Initializes libsodium once; safe to call repeatedly.
void crypto_init();

// Random bytes from system entropy, or a reproducible ChaCha20 stream when seeded.
class Drbg {
 public:
  Drbg();
  explicit Drbg(uint64_t seed);

  void fill(std::span<uint8_t> out);
  Bytes bytes(size_t n);
  uint64_t next_u64();
  uint64_t below(uint64_t n);
  bool deterministic() const { return seeded_; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

 private:
  bool seeded_ = false;
  std::array<uint8_t, 32> key_{};
  uint64_t counter_ = 0;
};

Digest32 sha256(std::span<const uint8_t> data);
std::array<uint8_t, 64> sha512(std::span<const uint8_t> data);
// SHA-256 over a one-byte domain tag followed by data.
Digest32 tagged_hash(uint8_t tag, std::span<const uint8_t> data);

// AES-128 single-block encryption: a keyed permutation on 128-bit blocks.
class Aes128Prp {
 public:
  explicit Aes128Prp(const Block16& key);
  ~Aes128Prp();
  Aes128Prp(const Aes128Prp&) = delete;
  Aes128Prp& operator=(const Aes128Prp&) = delete;

  Block16 permute(const Block16& in) const;
  Block16 invert(const Block16& in) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// AES-128-GCM with an all-zero nonce. Each key must seal exactly one message.
Bytes seal_once(const Block16& key, std::span<const uint8_t> plaintext);
std::optional<Bytes> open_once(const Block16& key, std::span<const uint8_t> ciphertext);

inline constexpr size_t kAeadOverhead = 16;

std::string to_hex(std::span<const uint8_t> data);

}  // namespace cpb
