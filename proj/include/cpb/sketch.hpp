#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cpb/corpus.hpp"
#include "cpb/crypto.hpp"

namespace cpb {

struct SketchParams {
  double epsilon = 0.01;
  double delta = 0.01;
  uint64_t domain = 0;  // M
  uint32_t depth = 0;   // d
  uint32_t width = 0;   // w

  uint64_t cells() const { return uint64_t{depth} * width; }
  bool operator==(const SketchParams&) const = default;
};

// w = ceil(e / epsilon), d = ceil(ln(M * M / (2 * delta))).
SketchParams size_sketch(double epsilon, double delta, uint64_t domain);

// Row r maps x to (h1(x) + r * h2(x)) mod w, with h1 and h2 drawn from the
// ((a * x + b) mod 2^61-1) family.
struct SketchHash {
  uint64_t a1 = 0, b1 = 0, a2 = 0, b2 = 0;

  static SketchHash from_seed(uint64_t seed);
  bool operator==(const SketchHash&) const = default;
};

// Unordered pair of /24 sources as a * 2^24 + b with a < b.
uint64_t encode_pair(Subnet24 a, Subnet24 b);

class CountMinSketch {
 public:
  CountMinSketch(SketchParams params, SketchHash hash);

  const SketchParams& params() const { return params_; }
  const SketchHash& hash() const { return hash_; }
  const std::vector<uint64_t>& counters() const { return counters_; }
  std::vector<uint64_t>& counters() { return counters_; }

  uint32_t column(uint32_t row, uint64_t item) const;
  void update(uint64_t item, uint64_t count = 1);
  uint64_t query(uint64_t item) const;
  uint64_t total() const { return total_; }

  // Entrywise sum; parameters and hash seeds must match.
  CountMinSketch& operator+=(const CountMinSketch& other);
  bool operator==(const CountMinSketch& other) const;

  void serialize(std::ostream& out) const;
  static CountMinSketch deserialize(std::istream& in);

 private:
  SketchParams params_;
  SketchHash hash_;
  std::vector<uint64_t> counters_;
  uint64_t total_ = 0;
};

struct AggregationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// X25519 identity used to agree pairwise mask seeds.
struct MaskingIdentity {
  OrgId org;
  std::array<uint8_t, 32> public_key{};
  std::array<uint8_t, 32> secret_key{};

  static MaskingIdentity generate(const OrgId& org, Drbg& rng);
};

struct PublicIdentity {
  OrgId org;
  std::array<uint8_t, 32> public_key{};
};

struct BlindedSketch {
  OrgId org;
  SketchParams params;
  SketchHash hash;
  // Counters plus pairwise masks, modulo 2^64.
  std::vector<uint64_t> masked;
};

// Masks `sketch` against every other member of `group` for aggregation
// round `round`. The lower org id adds each pairwise stream, the higher one
// subtracts it.
BlindedSketch blind_sketch(const CountMinSketch& sketch, const MaskingIdentity& self,
                           std::span<const PublicIdentity> group, uint64_t round);

// Partition of `n` members into balanced consecutive chunks of at most `max_size`.
std::vector<std::vector<size_t>> aggregation_subgroups(size_t n, size_t max_size = 100);

// STA side: sums the blinded sketches of exactly the members in `expected`.
// A missing or unexpected submission aborts the aggregation.
CountMinSketch aggregate_blinded(std::span<const BlindedSketch> submissions, std::span<const OrgId> expected);

// End-to-end: identities, subgroup masking, submission and summation.
CountMinSketch private_aggregate(std::span<const CountMinSketch> sketches, std::span<const OrgId> orgs, Drbg& rng,
                                 uint64_t round = 0, size_t max_subgroup = 100);

}  // namespace cpb
