#include "cpb/sharing.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

namespace cpb {

std::string to_string(SharingStrategy strategy) {
  switch (strategy) {
    case SharingStrategy::local:
      return "local";
    case SharingStrategy::global:
      return "global";
    case SharingStrategy::intersection:
      return "intersection";
    case SharingStrategy::ip2ip:
      return "ip2ip";
    case SharingStrategy::ip2ip_and_intersection:
      return "ip2ip_and_intersection";
  }
  return "unknown";
}

SharingStrategy parse_sharing_strategy(const std::string& name) {
  if (name == "local") return SharingStrategy::local;
  if (name == "global") return SharingStrategy::global;
  if (name == "intersection") return SharingStrategy::intersection;
  if (name == "ip2ip") return SharingStrategy::ip2ip;
  if (name == "ip2ip_and_intersection" || name == "ip2ip+intersection") return SharingStrategy::ip2ip_and_intersection;
  throw std::invalid_argument("unknown sharing strategy: " + name);
}

namespace {

std::unordered_map<Subnet24, uint64_t> multiplicities(const OrgLog& log) {
  std::unordered_map<Subnet24, uint64_t> out;
  for (const auto& e : log.events) ++out[e.source];
  return out;
}

std::vector<const OrgLog*> others(std::span<const OrgLog> cluster, size_t self) {
  std::vector<const OrgLog*> out;
  for (size_t j = 0; j < cluster.size(); ++j) {
    if (j != self) out.push_back(&cluster[j]);
  }
  return out;
}

}  // namespace

std::vector<AttackEvent> intersection_extra(const OrgLog& recipient, std::span<const OrgLog* const> peers,
                                            bool multiset) {
  const auto own = multiplicities(recipient);
  std::vector<AttackEvent> out;
  for (const OrgLog* peer : peers) {
    if (!multiset) {
      for (const auto& e : peer->events) {
        if (own.count(e.source)) out.push_back(e);
      }
      continue;
    }
    std::vector<size_t> order(peer->events.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return peer->events[a].day < peer->events[b].day; });
    std::unordered_map<Subnet24, uint64_t> sent;
    for (size_t idx : order) {
      const auto& e = peer->events[idx];
      auto it = own.find(e.source);
      if (it == own.end()) continue;
      uint64_t& n = sent[e.source];
      if (n < it->second) {
        ++n;
        out.push_back(e);
      }
    }
  }
  return out;
}

std::vector<AttackEvent> global_extra(const OrgLog&, std::span<const OrgLog* const> peers) {
  std::vector<AttackEvent> out;
  for (const OrgLog* peer : peers) out.insert(out.end(), peer->events.begin(), peer->events.end());
  return out;
}

SharedEvents share_intersection(std::span<const OrgLog> cluster, bool multiset) {
  SharedEvents out;
  for (size_t i = 0; i < cluster.size(); ++i) {
    const auto peers = others(cluster, i);
    out[cluster[i].org] = intersection_extra(cluster[i], peers, multiset);
  }
  return out;
}

SharedEvents share_global(std::span<const OrgLog> cluster) {
  SharedEvents out;
  for (size_t i = 0; i < cluster.size(); ++i) {
    const auto peers = others(cluster, i);
    out[cluster[i].org] = global_extra(cluster[i], peers);
  }
  return out;
}

HeavyHitters heavy_hitters(std::span<const OrgLog> cluster, size_t limit) {
  std::unordered_map<Subnet24, uint64_t> totals;
  for (const auto& log : cluster) {
    for (const auto& e : log.events) ++totals[e.source];
  }
  std::vector<std::pair<Subnet24, uint64_t>> ranked(totals.begin(), totals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  HeavyHitters out;
  for (size_t i = 0; i < ranked.size() && i < limit; ++i) out.sources.push_back(ranked[i].first);
  return out;
}

IP2IPMatrix::IP2IPMatrix(std::vector<Subnet24> domain) : domain_(std::move(domain)) {
  for (size_t i = 0; i < domain_.size(); ++i) {
    if (!rank_.emplace(domain_[i], i).second) throw std::invalid_argument("duplicate source in IP2IP domain");
  }
  const size_t n = domain_.size();
  weights_.assign(n * (n - (n ? 1 : 0)) / 2, 0);
}

std::optional<size_t> IP2IPMatrix::rank(Subnet24 s) const {
  auto it = rank_.find(s);
  if (it == rank_.end()) return std::nullopt;
  return it->second;
}

size_t IP2IPMatrix::slot(size_t ra, size_t rb) const {
  if (ra > rb) std::swap(ra, rb);
  const size_t n = domain_.size();
  // Offset of row ra in the strict upper triangle.
  return ra * (2 * n - ra - 1) / 2 + (rb - ra - 1);
}

uint64_t IP2IPMatrix::weight_at(size_t ra, size_t rb) const {
  if (ra == rb) return 0;
  return weights_[slot(ra, rb)];
}

uint64_t IP2IPMatrix::weight(Subnet24 a, Subnet24 b) const {
  const auto ra = rank(a), rb = rank(b);
  if (!ra || !rb) return 0;
  return weight_at(*ra, *rb);
}

void IP2IPMatrix::add_at(size_t ra, size_t rb, uint64_t w) {
  if (ra == rb) return;
  weights_[slot(ra, rb)] += w;
}

void IP2IPMatrix::set_at(size_t ra, size_t rb, uint64_t w) {
  if (ra == rb) return;
  weights_[slot(ra, rb)] = w;
}

namespace {

// Sorted heavy-hitter ranks present per (org, day).
std::vector<std::vector<size_t>> daily_rank_sets(const OrgLog& log, const IP2IPMatrix& m) {
  std::map<int32_t, std::set<size_t>> by_day;
  for (const auto& e : log.events) {
    if (auto r = m.rank(e.source)) by_day[e.day].insert(*r);
  }
  std::vector<std::vector<size_t>> out;
  for (auto& [day, ranks] : by_day) out.emplace_back(ranks.begin(), ranks.end());
  return out;
}

}  // namespace

IP2IPMatrix build_ip2ip(std::span<const OrgLog> cluster, const HeavyHitters& hh) {
  IP2IPMatrix m(hh.sources);
  for (const auto& log : cluster) {
    for (const auto& ranks : daily_rank_sets(log, m)) {
      for (size_t a = 0; a < ranks.size(); ++a) {
        for (size_t b = a + 1; b < ranks.size(); ++b) m.add_at(ranks[a], ranks[b]);
      }
    }
  }
  return m;
}

IP2IPMatrix build_ip2ip_sketch(std::span<const OrgLog> cluster, const HeavyHitters& hh, const SketchParams& params,
                               const SketchHash& hash, Drbg& rng) {
  IP2IPMatrix m(hh.sources);
  const uint64_t stride = std::max<uint64_t>(params.domain, hh.sources.size());
  if (cluster.empty()) return m;
  std::vector<CountMinSketch> sketches;
  std::vector<OrgId> orgs;
  for (const auto& log : cluster) {
    CountMinSketch s(params, hash);
    for (const auto& ranks : daily_rank_sets(log, m)) {
      for (size_t a = 0; a < ranks.size(); ++a) {
        for (size_t b = a + 1; b < ranks.size(); ++b) s.update(ranks[a] * stride + ranks[b]);
      }
    }
    sketches.push_back(std::move(s));
    orgs.push_back(log.org);
  }
  const CountMinSketch sum = private_aggregate(sketches, orgs, rng);
  const size_t n = hh.sources.size();
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = a + 1; b < n; ++b) m.set_at(a, b, sum.query(a * stride + b));
  }
  return m;
}

std::vector<Subnet24> top_correlated(const IP2IPMatrix& m, Subnet24 s, size_t limit) {
  const auto r = m.rank(s);
  if (!r) return {};
  std::vector<std::pair<uint64_t, Subnet24>> partners;
  for (size_t j = 0; j < m.domain().size(); ++j) {
    if (j == *r) continue;
    const uint64_t w = m.weight_at(*r, j);
    if (w > 0) partners.emplace_back(w, m.domain()[j]);
  }
  const size_t keep = std::min(limit, partners.size());
  auto by_weight = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(partners.begin(), partners.begin() + static_cast<std::ptrdiff_t>(keep), partners.end(), by_weight);
  std::vector<Subnet24> out;
  for (size_t i = 0; i < keep; ++i) out.push_back(partners[i].second);
  return out;
}

namespace {

using CorrelateLookup = std::function<const std::vector<Subnet24>&(size_t rank, Subnet24 s)>;

std::vector<AttackEvent> inject_correlates(const OrgLog& recipient, const IP2IPMatrix& m, int32_t last_train_day,
                                           const CorrelateLookup& correlates) {
  const SubnetSet own = recipient.unique_sources();
  std::set<Subnet24> added;
  std::vector<AttackEvent> out;
  for (const Subnet24 s : own) {
    const auto r = m.rank(s);
    if (!r) continue;
    for (const Subnet24 c : correlates(*r, s)) {
      if (own.count(c) || !added.insert(c).second) continue;
      out.push_back({last_train_day, recipient.org, c});
    }
  }
  return out;
}

}  // namespace

std::vector<AttackEvent> ip2ip_extra(const OrgLog& recipient, const IP2IPMatrix& m, int32_t last_train_day,
                                     size_t limit) {
  std::vector<Subnet24> scratch;
  return inject_correlates(recipient, m, last_train_day, [&](size_t, Subnet24 s) -> const std::vector<Subnet24>& {
    scratch = top_correlated(m, s, limit);
    return scratch;
  });
}

SharedEvents share_ip2ip(std::span<const OrgLog> cluster, const IP2IPMatrix& m, int32_t last_train_day) {
  std::vector<std::optional<std::vector<Subnet24>>> table(m.domain().size());
  auto lookup = [&](size_t r, Subnet24 s) -> const std::vector<Subnet24>& {
    if (!table[r]) table[r] = top_correlated(m, s);
    return *table[r];
  };
  SharedEvents out;
  for (const auto& log : cluster) out[log.org] = inject_correlates(log, m, last_train_day, lookup);
  return out;
}

}  // namespace cpb
