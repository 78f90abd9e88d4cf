#include "cpb/sketch.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <map>
#include <stdexcept>

namespace cpb {

namespace {

constexpr uint64_t kMersenne61 = (uint64_t{1} << 61) - 1;
constexpr std::array<char, 4> kMagic = {'C', 'M', 'S', '1'};

uint64_t mod_mersenne(unsigned __int128 x) {
  uint64_t r = static_cast<uint64_t>(x & kMersenne61) + static_cast<uint64_t>(x >> 61);
  r = (r & kMersenne61) + (r >> 61);
  return r >= kMersenne61 ? r - kMersenne61 : r;
}

uint64_t universal(uint64_t a, uint64_t b, uint64_t x) {
  return mod_mersenne(static_cast<unsigned __int128>(a) * mod_mersenne(x) + b);
}

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

template <typename T>
void write_le(std::ostream& out, T v) {
  uint8_t b[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<uint8_t>(static_cast<uint64_t>(v) >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <typename T>
T read_le(std::istream& in) {
  uint8_t b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof b)) throw std::runtime_error("truncated sketch");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= uint64_t{b[i]} << (8 * i);
  return static_cast<T>(v);
}

void write_double(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  write_le(out, bits);
}

double read_double(std::istream& in) {
  const auto bits = read_le<uint64_t>(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::vector<uint64_t> mask_stream(const MaskingIdentity& self, const PublicIdentity& peer, uint64_t round,
                                  size_t cells) {
  std::array<uint8_t, crypto_scalarmult_BYTES> shared{};
  if (crypto_scalarmult(shared.data(), self.secret_key.data(), peer.public_key.data()) != 0) {
    throw AggregationError("key agreement with " + peer.org + " failed");
  }
  std::array<uint8_t, 40> material{};
  std::copy(shared.begin(), shared.end(), material.begin());
  for (int i = 0; i < 8; ++i) material[32 + i] = static_cast<uint8_t>(round >> (56 - 8 * i));
  const Digest32 key = sha256(material);
  sodium_memzero(shared.data(), shared.size());

  std::vector<uint8_t> bytes(cells * 8);
  const uint8_t nonce[crypto_stream_chacha20_ietf_NONCEBYTES] = {};
  crypto_stream_chacha20_ietf(bytes.data(), bytes.size(), nonce, key.data());
  std::vector<uint64_t> out(cells);
  for (size_t c = 0; c < cells; ++c) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t{bytes[c * 8 + i]} << (8 * i);
    out[c] = v;
  }
  return out;
}

}  // namespace

SketchParams size_sketch(double epsilon, double delta, uint64_t domain) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
  if (domain < 2) throw std::invalid_argument("sketch domain must be at least 2");
  SketchParams p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.domain = domain;
  p.width = static_cast<uint32_t>(std::ceil(std::exp(1.0) / epsilon));
  const double m = static_cast<double>(domain);
  p.depth = static_cast<uint32_t>(std::ceil(std::log(m * m / (2.0 * delta))));
  return p;
}

SketchHash SketchHash::from_seed(uint64_t seed) {
  uint64_t state = seed;
  SketchHash h;
  h.a1 = 1 + splitmix64(state) % (kMersenne61 - 1);
  h.b1 = splitmix64(state) % kMersenne61;
  h.a2 = 1 + splitmix64(state) % (kMersenne61 - 1);
  h.b2 = splitmix64(state) % kMersenne61;
  return h;
}

uint64_t encode_pair(Subnet24 a, Subnet24 b) {
  if (b < a) std::swap(a, b);
  return (uint64_t{a.value()} << 24) | b.value();
}

CountMinSketch::CountMinSketch(SketchParams params, SketchHash hash)
    : params_(params), hash_(hash), counters_(params.cells(), 0) {
  if (params.depth == 0 || params.width == 0) throw std::invalid_argument("empty sketch");
}

uint32_t CountMinSketch::column(uint32_t row, uint64_t item) const {
  const uint64_t w = params_.width;
  const uint64_t h1 = universal(hash_.a1, hash_.b1, item) % w;
  // Nonzero stride so rows never all collapse onto one column.
  const uint64_t h2 = w > 1 ? 1 + universal(hash_.a2, hash_.b2, item) % (w - 1) : 0;
  return static_cast<uint32_t>((h1 + (uint64_t{row} * h2) % w) % w);
}

void CountMinSketch::update(uint64_t item, uint64_t count) {
  for (uint32_t r = 0; r < params_.depth; ++r) counters_[uint64_t{r} * params_.width + column(r, item)] += count;
  total_ += count;
}

uint64_t CountMinSketch::query(uint64_t item) const {
  uint64_t best = UINT64_MAX;
  for (uint32_t r = 0; r < params_.depth; ++r) {
    best = std::min(best, counters_[uint64_t{r} * params_.width + column(r, item)]);
  }
  return best;
}

CountMinSketch& CountMinSketch::operator+=(const CountMinSketch& other) {
  if (!(params_ == other.params_) || !(hash_ == other.hash_)) {
    throw std::invalid_argument("cannot add sketches with different parameters");
  }
  for (size_t i = 0; i < counters_.size(); ++i) counters_[i] += other.counters_[i];
  total_ += other.total_;
  return *this;
}

bool CountMinSketch::operator==(const CountMinSketch& other) const {
  return params_ == other.params_ && hash_ == other.hash_ && counters_ == other.counters_;
}

void CountMinSketch::serialize(std::ostream& out) const {
  out.write(kMagic.data(), kMagic.size());
  write_le(out, params_.depth);
  write_le(out, params_.width);
  write_double(out, params_.epsilon);
  write_double(out, params_.delta);
  write_le(out, params_.domain);
  for (uint64_t s : {hash_.a1, hash_.b1, hash_.a2, hash_.b2}) write_le(out, s);
  write_le(out, total_);
  for (uint64_t c : counters_) write_le(out, c);
}

CountMinSketch CountMinSketch::deserialize(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("not a sketch");
  SketchParams p;
  p.depth = read_le<uint32_t>(in);
  p.width = read_le<uint32_t>(in);
  p.epsilon = read_double(in);
  p.delta = read_double(in);
  p.domain = read_le<uint64_t>(in);
  SketchHash h;
  h.a1 = read_le<uint64_t>(in);
  h.b1 = read_le<uint64_t>(in);
  h.a2 = read_le<uint64_t>(in);
  h.b2 = read_le<uint64_t>(in);
  if (p.cells() == 0 || p.cells() > (uint64_t{1} << 28)) throw std::runtime_error("bad sketch dimensions");
  CountMinSketch out(p, h);
  out.total_ = read_le<uint64_t>(in);
  for (auto& c : out.counters_) c = read_le<uint64_t>(in);
  return out;
}

MaskingIdentity MaskingIdentity::generate(const OrgId& org, Drbg& rng) {
  crypto_init();
  MaskingIdentity id;
  id.org = org;
  rng.fill(id.secret_key);
  crypto_scalarmult_base(id.public_key.data(), id.secret_key.data());
  return id;
}

BlindedSketch blind_sketch(const CountMinSketch& sketch, const MaskingIdentity& self,
                           std::span<const PublicIdentity> group, uint64_t round) {
  BlindedSketch out{self.org, sketch.params(), sketch.hash(), sketch.counters()};
  const size_t cells = out.masked.size();
  for (const auto& peer : group) {
    if (peer.org == self.org) continue;
    const auto mask = mask_stream(self, peer, round, cells);
    if (self.org < peer.org) {
      for (size_t c = 0; c < cells; ++c) out.masked[c] += mask[c];
    } else {
      for (size_t c = 0; c < cells; ++c) out.masked[c] -= mask[c];
    }
  }
  return out;
}

std::vector<std::vector<size_t>> aggregation_subgroups(size_t n, size_t max_size) {
  if (max_size == 0) throw std::invalid_argument("subgroup size must be positive");
  std::vector<std::vector<size_t>> out;
  if (n == 0) return out;
  const size_t groups = (n + max_size - 1) / max_size;
  size_t next = 0;
  for (size_t g = 0; g < groups; ++g) {
    const size_t size = n / groups + (g < n % groups ? 1 : 0);
    std::vector<size_t> members;
    for (size_t i = 0; i < size; ++i) members.push_back(next++);
    out.push_back(std::move(members));
  }
  return out;
}

CountMinSketch aggregate_blinded(std::span<const BlindedSketch> submissions, std::span<const OrgId> expected) {
  if (expected.empty()) throw AggregationError("no members to aggregate");
  if (expected.size() == 1) std::clog << "warning: aggregating a single member; its sketch is not hidden\n";
  std::map<OrgId, const BlindedSketch*> by_org;
  for (const auto& s : submissions) {
    if (!by_org.emplace(s.org, &s).second) throw AggregationError("duplicate submission from " + s.org);
  }
  for (const auto& org : expected) {
    if (!by_org.count(org)) throw AggregationError("missing submission from " + org);
  }
  if (by_org.size() != expected.size()) throw AggregationError("submission from a non-member");

  const BlindedSketch& first = *by_org.at(expected.front());
  CountMinSketch out(first.params, first.hash);
  auto& sum = out.counters();
  for (const auto& org : expected) {
    const BlindedSketch& s = *by_org.at(org);
    if (!(s.params == first.params) || !(s.hash == first.hash) || s.masked.size() != sum.size()) {
      throw AggregationError("sketch parameters differ for " + org);
    }
    for (size_t c = 0; c < sum.size(); ++c) sum[c] += s.masked[c];
  }
  return out;
}

CountMinSketch private_aggregate(std::span<const CountMinSketch> sketches, std::span<const OrgId> orgs, Drbg& rng,
                                 uint64_t round, size_t max_subgroup) {
  if (sketches.size() != orgs.size() || sketches.empty()) throw std::invalid_argument("one sketch per org required");
  std::optional<CountMinSketch> total;
  for (const auto& members : aggregation_subgroups(orgs.size(), max_subgroup)) {
    std::vector<MaskingIdentity> ids;
    std::vector<PublicIdentity> pubs;
    std::vector<OrgId> expected;
    for (size_t i : members) {
      ids.push_back(MaskingIdentity::generate(orgs[i], rng));
      pubs.push_back({orgs[i], ids.back().public_key});
      expected.push_back(orgs[i]);
    }
    std::vector<BlindedSketch> blinded;
    for (size_t m = 0; m < members.size(); ++m) blinded.push_back(blind_sketch(sketches[members[m]], ids[m], pubs, round));
    auto part = aggregate_blinded(blinded, expected);
    if (total) {
      *total += part;
    } else {
      total = std::move(part);
    }
  }
  return std::move(*total);
}

}  // namespace cpb
