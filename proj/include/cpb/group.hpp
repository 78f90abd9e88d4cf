#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "cpb/crypto.hpp"

namespace cpb {

enum class GroupId : uint8_t {
  // ristretto255: prime order 2^252 + ..., ~128-bit security.
  ristretto255 = 1,
  // 2048-bit MODP group with a 256-bit prime-order subgroup (RFC 5114 2.3).
  modp2048 = 2,
};

std::string to_string(GroupId id);
GroupId parse_group_id(const std::string& name);

// Prime-order group used by the Diffie-Hellman style PSI protocols. Elements
// and scalars travel as fixed-length canonical byte strings.
class PrimeOrderGroup {
 public:
  virtual ~PrimeOrderGroup() = default;

  virtual GroupId id() const = 0;
  virtual size_t element_size() const = 0;
  virtual size_t scalar_size() const = 0;

  // Deterministic map from arbitrary bytes to a non-identity group element.
  virtual Bytes hash_to_group(std::span<const uint8_t> data) const = 0;
  virtual Bytes random_scalar(Drbg& rng) const = 0;
  virtual Bytes invert_scalar(const Bytes& scalar) const = 0;
  // element^scalar; throws CryptoError on a non-canonical or invalid element.
  virtual Bytes exp(const Bytes& element, const Bytes& scalar) const = 0;
  virtual bool is_valid_element(std::span<const uint8_t> element) const = 0;
};

std::shared_ptr<const PrimeOrderGroup> make_group(GroupId id);

}  // namespace cpb
