#define OPENSSL_SUPPRESS_DEPRECATED
#include "cpb/group.hpp"

#include <openssl/bn.h>
#include <openssl/dh.h>
#include <sodium.h>

#include <stdexcept>

namespace cpb {

std::string to_string(GroupId id) {
  switch (id) {
    case GroupId::ristretto255:
      return "ristretto255";
    case GroupId::modp2048:
      return "modp2048";
  }
  return "unknown";
}

GroupId parse_group_id(const std::string& name) {
  if (name == "ristretto255" || name == "ec") return GroupId::ristretto255;
  if (name == "modp2048" || name == "modp") return GroupId::modp2048;
  throw std::invalid_argument("unknown group: " + name);
}

namespace {

constexpr uint8_t kHashToGroupTag = 0x01;

class Ristretto255 final : public PrimeOrderGroup {
 public:
  Ristretto255() { crypto_init(); }

  GroupId id() const override { return GroupId::ristretto255; }
  size_t element_size() const override { return crypto_core_ristretto255_BYTES; }
  size_t scalar_size() const override { return crypto_core_ristretto255_SCALARBYTES; }

  Bytes hash_to_group(std::span<const uint8_t> data) const override {
    crypto_hash_sha512_state st;
    crypto_hash_sha512_init(&st);
    crypto_hash_sha512_update(&st, &kHashToGroupTag, 1);
    crypto_hash_sha512_update(&st, data.data(), data.size());
    uint8_t wide[64];
    crypto_hash_sha512_final(&st, wide);
    Bytes out(element_size());
    crypto_core_ristretto255_from_hash(out.data(), wide);
    return out;
  }

  Bytes random_scalar(Drbg& rng) const override {
    Bytes out(scalar_size());
    uint8_t wide[crypto_core_ristretto255_NONREDUCEDSCALARBYTES];
    do {
      rng.fill(wide);
      crypto_core_ristretto255_scalar_reduce(out.data(), wide);
    } while (sodium_is_zero(out.data(), out.size()));
    return out;
  }

  Bytes invert_scalar(const Bytes& scalar) const override {
    check_scalar(scalar);
    Bytes out(scalar_size());
    if (crypto_core_ristretto255_scalar_invert(out.data(), scalar.data()) != 0) {
      throw CryptoError("ristretto255: cannot invert zero scalar");
    }
    return out;
  }

  Bytes exp(const Bytes& element, const Bytes& scalar) const override {
    check_scalar(scalar);
    if (element.size() != element_size()) throw CryptoError("ristretto255: bad element length");
    Bytes out(element_size());
    if (crypto_scalarmult_ristretto255(out.data(), scalar.data(), element.data()) != 0) {
      throw CryptoError("ristretto255: invalid element or identity result");
    }
    return out;
  }

  bool is_valid_element(std::span<const uint8_t> element) const override {
    return element.size() == element_size() && crypto_core_ristretto255_is_valid_point(element.data()) == 1;
  }

 private:
  void check_scalar(const Bytes& scalar) const {
    if (scalar.size() != scalar_size()) throw CryptoError("ristretto255: bad scalar length");
  }
};

struct BnDeleter {
  void operator()(BIGNUM* b) const { BN_free(b); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
struct MontDeleter {
  void operator()(BN_MONT_CTX* m) const { BN_MONT_CTX_free(m); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;

BnPtr bn_new() {
  BnPtr b(BN_new());
  if (!b) throw CryptoError("BN_new failed");
  return b;
}

class Modp2048 final : public PrimeOrderGroup {
 public:
  Modp2048() {
    crypto_init();
    DH* dh = DH_get_2048_256();
    if (!dh) throw CryptoError("RFC 5114 group unavailable");
    const BIGNUM *p = nullptr, *q = nullptr, *g = nullptr;
    DH_get0_pqg(dh, &p, &q, &g);
    p_.reset(BN_dup(p));
    q_.reset(BN_dup(q));
    DH_free(dh);
    BnCtxPtr ctx(BN_CTX_new());
    cofactor_ = bn_new();
    auto pm1 = bn_new();
    BN_sub(pm1.get(), p_.get(), BN_value_one());
    BN_div(cofactor_.get(), nullptr, pm1.get(), q_.get(), ctx.get());
    mont_.reset(BN_MONT_CTX_new());
    BN_MONT_CTX_set(mont_.get(), p_.get(), ctx.get());
  }

  GroupId id() const override { return GroupId::modp2048; }
  size_t element_size() const override { return 256; }
  size_t scalar_size() const override { return 32; }

  Bytes hash_to_group(std::span<const uint8_t> data) const override {
    BnCtxPtr ctx(BN_CTX_new());
    auto x = bn_new();
    auto h = bn_new();
    for (uint32_t attempt = 0;; ++attempt) {
      // 320 bytes of SHA-512 output reduced mod p, then raised to the cofactor.
      Bytes wide;
      for (uint8_t block = 0; block < 5; ++block) {
        crypto_hash_sha512_state st;
        crypto_hash_sha512_init(&st);
        uint8_t prefix[6] = {kHashToGroupTag, block, static_cast<uint8_t>(attempt >> 24),
                             static_cast<uint8_t>(attempt >> 16), static_cast<uint8_t>(attempt >> 8),
                             static_cast<uint8_t>(attempt)};
        crypto_hash_sha512_update(&st, prefix, sizeof prefix);
        crypto_hash_sha512_update(&st, data.data(), data.size());
        uint8_t out[64];
        crypto_hash_sha512_final(&st, out);
        wide.insert(wide.end(), out, out + 64);
      }
      BN_bin2bn(wide.data(), static_cast<int>(wide.size()), x.get());
      BN_mod(x.get(), x.get(), p_.get(), ctx.get());
      BN_mod_exp_mont(h.get(), x.get(), cofactor_.get(), p_.get(), ctx.get(), mont_.get());
      if (!BN_is_one(h.get()) && !BN_is_zero(h.get())) return encode(h.get());
    }
  }

  Bytes random_scalar(Drbg& rng) const override {
    BnCtxPtr ctx(BN_CTX_new());
    auto s = bn_new();
    do {
      auto wide = rng.bytes(48);
      BN_bin2bn(wide.data(), static_cast<int>(wide.size()), s.get());
      BN_mod(s.get(), s.get(), q_.get(), ctx.get());
    } while (BN_is_zero(s.get()));
    return encode_scalar(s.get());
  }

  Bytes invert_scalar(const Bytes& scalar) const override {
    BnCtxPtr ctx(BN_CTX_new());
    auto s = decode_scalar(scalar);
    auto inv = bn_new();
    if (!BN_mod_inverse(inv.get(), s.get(), q_.get(), ctx.get())) {
      throw CryptoError("modp2048: scalar not invertible");
    }
    return encode_scalar(inv.get());
  }

  Bytes exp(const Bytes& element, const Bytes& scalar) const override {
    if (element.size() != element_size()) throw CryptoError("modp2048: bad element length");
    BnCtxPtr ctx(BN_CTX_new());
    auto e = bn_new();
    BN_bin2bn(element.data(), static_cast<int>(element.size()), e.get());
    if (BN_cmp(e.get(), BN_value_one()) <= 0 || BN_cmp(e.get(), p_.get()) >= 0) {
      throw CryptoError("modp2048: element out of range");
    }
    auto s = decode_scalar(scalar);
    auto r = bn_new();
    BN_mod_exp_mont(r.get(), e.get(), s.get(), p_.get(), ctx.get(), mont_.get());
    if (BN_is_one(r.get())) throw CryptoError("modp2048: identity result");
    return encode(r.get());
  }

  bool is_valid_element(std::span<const uint8_t> element) const override {
    if (element.size() != element_size()) return false;
    BnCtxPtr ctx(BN_CTX_new());
    auto e = bn_new();
    BN_bin2bn(element.data(), static_cast<int>(element.size()), e.get());
    if (BN_cmp(e.get(), BN_value_one()) <= 0 || BN_cmp(e.get(), p_.get()) >= 0) return false;
    auto r = bn_new();
    BN_mod_exp_mont(r.get(), e.get(), q_.get(), p_.get(), ctx.get(), mont_.get());
    return BN_is_one(r.get());
  }

 private:
  Bytes encode(const BIGNUM* v) const {
    Bytes out(element_size());
    BN_bn2binpad(v, out.data(), static_cast<int>(out.size()));
    return out;
  }
  Bytes encode_scalar(const BIGNUM* v) const {
    Bytes out(scalar_size());
    BN_bn2binpad(v, out.data(), static_cast<int>(out.size()));
    return out;
  }
  BnPtr decode_scalar(const Bytes& scalar) const {
    if (scalar.size() != scalar_size()) throw CryptoError("modp2048: bad scalar length");
    auto s = bn_new();
    BN_bin2bn(scalar.data(), static_cast<int>(scalar.size()), s.get());
    if (BN_is_zero(s.get()) || BN_cmp(s.get(), q_.get()) >= 0) throw CryptoError("modp2048: scalar out of range");
    return s;
  }

  BnPtr p_, q_, cofactor_;
  std::unique_ptr<BN_MONT_CTX, MontDeleter> mont_;
};

}  // namespace

std::shared_ptr<const PrimeOrderGroup> make_group(GroupId id) {
  switch (id) {
    case GroupId::ristretto255: {
      static const auto group = std::make_shared<const Ristretto255>();
      return group;
    }
    case GroupId::modp2048: {
      static const auto group = std::make_shared<const Modp2048>();
      return group;
    }
  }
  throw std::invalid_argument("unknown group id");
}

}  // namespace cpb
