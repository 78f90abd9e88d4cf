#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpb/corpus.hpp"
#include "cpb/crypto.hpp"
#include "cpb/sketch.hpp"

namespace cpb {

enum class SharingStrategy { local, global, intersection, ip2ip, ip2ip_and_intersection };

std::string to_string(SharingStrategy strategy);
SharingStrategy parse_sharing_strategy(const std::string& name);

struct AugmentedTrainingSet {
  OrgId org;
  OrgLog base;
  std::vector<AttackEvent> extra;
};

// Peer events whose source the recipient also saw. In multiset mode only the
// peer's first min(c_i, c_j) occurrences per source are sent, in (day,
// insertion) order.
std::vector<AttackEvent> intersection_extra(const OrgLog& recipient, std::span<const OrgLog* const> peers,
                                            bool multiset = false);
std::vector<AttackEvent> global_extra(const OrgLog& recipient, std::span<const OrgLog* const> peers);

using SharedEvents = std::map<OrgId, std::vector<AttackEvent>>;

SharedEvents share_intersection(std::span<const OrgLog> cluster, bool multiset = false);
SharedEvents share_global(std::span<const OrgLog> cluster);

struct HeavyHitters {
  // Descending total count, ties by source value.
  std::vector<Subnet24> sources;
};

inline constexpr size_t kHeavyHitters = 1000;
inline constexpr size_t kCorrelatesPerSource = 50;

HeavyHitters heavy_hitters(std::span<const OrgLog> cluster, size_t limit = kHeavyHitters);

// Co-occurrence weights over unordered pairs of heavy hitters.
class IP2IPMatrix {
 public:
  IP2IPMatrix() = default;
  explicit IP2IPMatrix(std::vector<Subnet24> domain);

  const std::vector<Subnet24>& domain() const { return domain_; }
  std::optional<size_t> rank(Subnet24 s) const;
  uint64_t weight(Subnet24 a, Subnet24 b) const;
  uint64_t weight_at(size_t ra, size_t rb) const;
  void add_at(size_t ra, size_t rb, uint64_t w = 1);
  void set_at(size_t ra, size_t rb, uint64_t w);

 private:
  size_t slot(size_t ra, size_t rb) const;

  std::vector<Subnet24> domain_;
  std::unordered_map<Subnet24, size_t> rank_;
  // Strict upper triangle, row-major.
  std::vector<uint64_t> weights_;
};

// weights[{a, b}] = number of (org, day) on which both a and b attacked that org.
IP2IPMatrix build_ip2ip(std::span<const OrgLog> cluster, const HeavyHitters& hh);

// Same matrix estimated from per-org Count-Min sketches over heavy-hitter rank
// pairs, summed by masked aggregation. Estimates never fall below the exact weights.
IP2IPMatrix build_ip2ip_sketch(std::span<const OrgLog> cluster, const HeavyHitters& hh, const SketchParams& params,
                               const SketchHash& hash, Drbg& rng);

// Up to `limit` positive-weight partners of s by descending weight, ties by value.
std::vector<Subnet24> top_correlated(const IP2IPMatrix& m, Subnet24 s, size_t limit = kCorrelatesPerSource);

// One synthetic event on `last_train_day` for each new correlate of every
// heavy hitter the recipient saw.
std::vector<AttackEvent> ip2ip_extra(const OrgLog& recipient, const IP2IPMatrix& m, int32_t last_train_day,
                                     size_t limit = kCorrelatesPerSource);
SharedEvents share_ip2ip(std::span<const OrgLog> cluster, const IP2IPMatrix& m, int32_t last_train_day);

}  // namespace cpb
