#include "cpb/crypto.hpp"

#include <openssl/evp.h>
#include <sodium.h>

#include <cstring>
#include <mutex>

namespace cpb {

void crypto_init() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw CryptoError("libsodium initialization failed");
  });
}

Drbg::Drbg() { crypto_init(); }

Drbg::Drbg(uint64_t seed) : seeded_(true) {
  crypto_init();
  uint8_t material[8];
  for (int i = 0; i < 8; ++i) material[i] = static_cast<uint8_t>(seed >> (8 * i));
  key_ = sha256(material);
}

void Drbg::fill(std::span<uint8_t> out) {
  if (out.empty()) return;
  if (!seeded_) {
    randombytes_buf(out.data(), out.size());
    return;
  }
  uint8_t nonce[crypto_stream_chacha20_ietf_NONCEBYTES] = {};
  for (int i = 0; i < 8; ++i) nonce[i] = static_cast<uint8_t>(counter_ >> (8 * i));
  ++counter_;
  crypto_stream_chacha20_ietf(out.data(), out.size(), nonce, key_.data());
}

Bytes Drbg::bytes(size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

uint64_t Drbg::next_u64() {
  uint8_t buf[8];
  fill(buf);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

uint64_t Drbg::below(uint64_t n) {
  if (n <= 1) return 0;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Digest32 sha256(std::span<const uint8_t> data) {
  Digest32 out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

std::array<uint8_t, 64> sha512(std::span<const uint8_t> data) {
  std::array<uint8_t, 64> out;
  crypto_hash_sha512(out.data(), data.data(), data.size());
  return out;
}

Digest32 tagged_hash(uint8_t tag, std::span<const uint8_t> data) {
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto_hash_sha256_update(&st, &tag, 1);
  crypto_hash_sha256_update(&st, data.data(), data.size());
  Digest32 out;
  crypto_hash_sha256_final(&st, out.data());
  return out;
}

struct Aes128Prp::Impl {
  EVP_CIPHER_CTX* enc = EVP_CIPHER_CTX_new();
  EVP_CIPHER_CTX* dec = EVP_CIPHER_CTX_new();
  ~Impl() {
    EVP_CIPHER_CTX_free(enc);
    EVP_CIPHER_CTX_free(dec);
  }
};

Aes128Prp::Aes128Prp(const Block16& key) : impl_(std::make_unique<Impl>()) {
  if (!impl_->enc || !impl_->dec ||
      EVP_EncryptInit_ex(impl_->enc, EVP_aes_128_ecb(), nullptr, key.data(), nullptr) != 1 ||
      EVP_DecryptInit_ex(impl_->dec, EVP_aes_128_ecb(), nullptr, key.data(), nullptr) != 1) {
    throw CryptoError("AES-128 key setup failed");
  }
  EVP_CIPHER_CTX_set_padding(impl_->enc, 0);
  EVP_CIPHER_CTX_set_padding(impl_->dec, 0);
}

Aes128Prp::~Aes128Prp() = default;

Block16 Aes128Prp::permute(const Block16& in) const {
  Block16 out;
  int len = 0;
  if (EVP_EncryptUpdate(impl_->enc, out.data(), &len, in.data(), 16) != 1 || len != 16) {
    throw CryptoError("AES-128 block encryption failed");
  }
  return out;
}

Block16 Aes128Prp::invert(const Block16& in) const {
  Block16 out;
  int len = 0;
  if (EVP_DecryptUpdate(impl_->dec, out.data(), &len, in.data(), 16) != 1 || len != 16) {
    throw CryptoError("AES-128 block decryption failed");
  }
  return out;
}

namespace {

struct CipherCtx {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
};

thread_local CipherCtx gcm_ctx;
constexpr uint8_t kZeroNonce[12] = {};

}  // namespace

Bytes seal_once(const Block16& key, std::span<const uint8_t> plaintext) {
  auto* ctx = gcm_ctx.ctx;
  Bytes out(plaintext.size() + kAeadOverhead);
  int len = 0;
  if (EVP_EncryptInit_ex(ctx, EVP_aes_128_gcm(), nullptr, key.data(), kZeroNonce) != 1 ||
      EVP_EncryptUpdate(ctx, out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) != 1 ||
      EVP_EncryptFinal_ex(ctx, out.data() + len, &len) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, 16, out.data() + plaintext.size()) != 1) {
    throw CryptoError("AES-GCM encryption failed");
  }
  return out;
}

std::optional<Bytes> open_once(const Block16& key, std::span<const uint8_t> ciphertext) {
  if (ciphertext.size() < kAeadOverhead) return std::nullopt;
  auto* ctx = gcm_ctx.ctx;
  const size_t n = ciphertext.size() - kAeadOverhead;
  Bytes out(n);
  uint8_t tag[16];
  std::memcpy(tag, ciphertext.data() + n, 16);
  int len = 0;
  if (EVP_DecryptInit_ex(ctx, EVP_aes_128_gcm(), nullptr, key.data(), kZeroNonce) != 1 ||
      EVP_DecryptUpdate(ctx, out.data(), &len, ciphertext.data(), static_cast<int>(n)) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, 16, tag) != 1) {
    throw CryptoError("AES-GCM setup failed");
  }
  if (EVP_DecryptFinal_ex(ctx, out.data() + len, &len) != 1) return std::nullopt;
  return out;
}

std::string to_hex(std::span<const uint8_t> data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

}  // namespace cpb
