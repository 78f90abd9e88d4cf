#include "cpb/psi.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "cpb/cpu_clock.hpp"

namespace cpb {
namespace {

constexpr size_t kTagSize = 32;
constexpr uint8_t kCaTagDomain = 0x02;
constexpr uint8_t kDtTagDomain = 0x03;
constexpr uint8_t kDtKeyDomain = 0x04;

std::vector<PsiElement> canonical(std::vector<PsiElement> set) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

std::array<uint8_t, 8> element_bytes(PsiElement e) {
  std::array<uint8_t, 8> out;
  for (int i = 0; i < 8; ++i) out[static_cast<size_t>(i)] = static_cast<uint8_t>(e >> (56 - 8 * i));
  return out;
}

Bytes hash_element(const PrimeOrderGroup& group, PsiElement e) { return group.hash_to_group(element_bytes(e)); }

std::string tag_key(std::span<const uint8_t> tag) { return {tag.begin(), tag.end()}; }

[[noreturn]] void unexpected(const Frame& in, const char* expected) {
  if (in.type == MessageType::abort) {
    AbortReason reason = AbortReason::unexpected_message;
    std::string detail;
    try {
      ByteReader r(in.payload);
      reason = static_cast<AbortReason>(r.u8());
      detail = r.str();
    } catch (const WireError&) {
    }
    throw ProtocolAbort(reason, "peer aborted: " + detail);
  }
  throw ProtocolAbort(AbortReason::unexpected_message,
                      "expected " + std::string(expected) + ", got " + to_string(in.type));
}

Frame hello_frame(PsiProtocol protocol, GroupId group, size_t set_size) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(protocol)).u8(static_cast<uint8_t>(group)).u32(static_cast<uint32_t>(set_size));
  return {MessageType::hello, w.take()};
}

size_t read_hello(const Frame& in, PsiProtocol protocol, GroupId group) {
  if (in.type != MessageType::hello) unexpected(in, "HELLO");
  try {
    ByteReader r(in.payload);
    const auto p = static_cast<PsiProtocol>(r.u8());
    const auto g = static_cast<GroupId>(r.u8());
    const uint32_t n = r.u32();
    r.expect_done();
    if (p != protocol) throw ProtocolAbort(AbortReason::protocol_mismatch, "HELLO names a different protocol");
    if (g != group) throw ProtocolAbort(AbortReason::group_mismatch, "HELLO names a different group");
    return n;
  } catch (const WireError& e) {
    throw ProtocolAbort(AbortReason::malformed_message, std::string("malformed HELLO: ") + e.what());
  }
}

void write_elements(ByteWriter& w, const std::vector<Bytes>& elements) {
  w.u32(static_cast<uint32_t>(elements.size()));
  for (const auto& e : elements) w.raw(e);
}

std::vector<Bytes> read_elements(ByteReader& r, const PrimeOrderGroup& group) {
  const uint32_t n = r.u32();
  if (static_cast<uint64_t>(n) * group.element_size() > r.remaining()) throw WireError("element batch truncated");
  std::vector<Bytes> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    auto b = r.raw(group.element_size());
    if (!group.is_valid_element(b)) throw CryptoError("received element is not in the group");
    out.emplace_back(b.begin(), b.end());
  }
  return out;
}

// Applies `op` and maps crypto failures onto protocol aborts.
template <typename F>
auto guarded(F&& op) {
  try {
    return op();
  } catch (const CryptoError& e) {
    throw ProtocolAbort(AbortReason::crypto_failure, e.what());
  } catch (const WireError& e) {
    throw ProtocolAbort(AbortReason::malformed_message, e.what());
  }
}

}  // namespace

Frame make_abort(AbortReason reason, const std::string& detail) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(reason)).str(detail.substr(0, 200));
  return {MessageType::abort, w.take()};
}

// ---- PSI-CA ----------------------------------------------------------------

PsiCaClient::PsiCaClient(std::vector<PsiElement> set, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng)
    : set_(canonical(std::move(set))), group_(std::move(group)), rng_(rng) {}

std::vector<Frame> PsiCaClient::start() {
  if (phase_ != Phase::idle) throw ProtocolAbort(AbortReason::unexpected_message, "PSI-CA client already started");
  phase_ = Phase::await_hello;
  return {hello_frame(PsiProtocol::psi_ca, group_->id(), set_.size())};
}

std::vector<Frame> PsiCaClient::handle(const Frame& in) {
  switch (phase_) {
    case Phase::await_hello: {
      peer_size_ = read_hello(in, PsiProtocol::psi_ca, group_->id());
      blind_ = group_->random_scalar(rng_);
      std::vector<Bytes> blinded;
      blinded.reserve(set_.size());
      for (PsiElement c : set_) blinded.push_back(group_->exp(hash_element(*group_, c), blind_));
      ByteWriter w;
      write_elements(w, blinded);
      phase_ = Phase::await_response;
      return {{MessageType::blinded_batch, w.take()}};
    }
    case Phase::await_response: {
      if (in.type != MessageType::response_batch) unexpected(in, "RESPONSE_BATCH");
      return guarded([&] {
        ByteReader r(in.payload);
        auto doubled = read_elements(r, *group_);
        const uint32_t n_tags = r.u32();
        if (n_tags != peer_size_) throw WireError("tag count does not match announced set size");
        if (doubled.size() != set_.size()) throw WireError("response count does not match blinded batch");
        std::unordered_set<std::string> tags;
        tags.reserve(n_tags);
        for (uint32_t i = 0; i < n_tags; ++i) tags.insert(tag_key(r.raw(kTagSize)));
        r.expect_done();
        const Bytes unblind = group_->invert_scalar(blind_);
        size_t matches = 0;
        for (const auto& d : doubled) {
          const auto t = tagged_hash(kCaTagDomain, group_->exp(d, unblind));
          matches += tags.count(tag_key(t));
        }
        cardinality_ = matches;
        phase_ = Phase::done;
        return std::vector<Frame>{};
      });
    }
    case Phase::idle:
    case Phase::done:
      break;
  }
  unexpected(in, "no message");
}

size_t PsiCaClient::cardinality() const {
  if (phase_ != Phase::done) throw std::logic_error("PSI-CA client has not finished");
  return cardinality_;
}

PsiCaServer::PsiCaServer(std::vector<PsiElement> set, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng)
    : set_(canonical(std::move(set))), group_(std::move(group)), rng_(rng) {}

std::vector<Frame> PsiCaServer::handle(const Frame& in) {
  switch (phase_) {
    case Phase::await_hello:
      peer_size_ = read_hello(in, PsiProtocol::psi_ca, group_->id());
      phase_ = Phase::await_blinded;
      return {hello_frame(PsiProtocol::psi_ca, group_->id(), set_.size())};
    case Phase::await_blinded: {
      if (in.type != MessageType::blinded_batch) unexpected(in, "BLINDED_BATCH");
      return guarded([&] {
        ByteReader r(in.payload);
        auto blinded = read_elements(r, *group_);
        r.expect_done();
        if (blinded.size() != peer_size_) throw WireError("blinded batch size differs from HELLO");
        const Bytes key = group_->random_scalar(rng_);
        std::vector<Bytes> doubled;
        doubled.reserve(blinded.size());
        for (const auto& a : blinded) doubled.push_back(group_->exp(a, key));
        rng_.shuffle(doubled);
        std::vector<Digest32> tags;
        tags.reserve(set_.size());
        for (PsiElement s : set_) tags.push_back(tagged_hash(kCaTagDomain, group_->exp(hash_element(*group_, s), key)));
        std::sort(tags.begin(), tags.end());
        ByteWriter w;
        write_elements(w, doubled);
        w.u32(static_cast<uint32_t>(tags.size()));
        for (const auto& t : tags) w.raw(t);
        phase_ = Phase::done;
        return std::vector<Frame>{{MessageType::response_batch, w.take()}};
      });
    }
    case Phase::done:
      break;
  }
  unexpected(in, "no message");
}

// ---- PSI-DT ----------------------------------------------------------------

PsiDtClient::PsiDtClient(std::vector<PsiElement> set, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng)
    : set_(canonical(std::move(set))), group_(std::move(group)), rng_(rng) {}

std::vector<Frame> PsiDtClient::start() {
  if (phase_ != Phase::idle) throw ProtocolAbort(AbortReason::unexpected_message, "PSI-DT client already started");
  phase_ = Phase::await_hello;
  return {hello_frame(PsiProtocol::psi_dt, group_->id(), set_.size())};
}

std::vector<Frame> PsiDtClient::handle(const Frame& in) {
  switch (phase_) {
    case Phase::await_hello: {
      peer_size_ = read_hello(in, PsiProtocol::psi_dt, group_->id());
      std::vector<Bytes> blinded;
      blinded.reserve(set_.size());
      blinds_.clear();
      for (PsiElement c : set_) {
        blinds_.push_back(group_->random_scalar(rng_));
        blinded.push_back(group_->exp(hash_element(*group_, c), blinds_.back()));
      }
      ByteWriter w;
      write_elements(w, blinded);
      phase_ = Phase::await_response;
      return {{MessageType::blinded_batch, w.take()}};
    }
    case Phase::await_response: {
      if (in.type != MessageType::response_batch) unexpected(in, "RESPONSE_BATCH");
      return guarded([&] {
        ByteReader r(in.payload);
        auto evaluated = read_elements(r, *group_);
        if (r.u32() != 0) throw WireError("PSI-DT response carries tags");
        r.expect_done();
        if (evaluated.size() != set_.size()) throw WireError("response count does not match blinded batch");
        unblinded_.clear();
        for (size_t i = 0; i < evaluated.size(); ++i) {
          unblinded_.push_back(group_->exp(evaluated[i], group_->invert_scalar(blinds_[i])));
        }
        blinds_.clear();
        phase_ = Phase::await_records;
        return std::vector<Frame>{};
      });
    }
    case Phase::await_records: {
      if (in.type != MessageType::record_batch) unexpected(in, "RECORD_BATCH");
      return guarded([&] {
        ByteReader r(in.payload);
        const uint32_t n = r.u32();
        if (n != peer_size_) throw WireError("record count does not match announced set size");
        std::unordered_map<std::string, Bytes> by_tag;
        by_tag.reserve(n);
        for (uint32_t i = 0; i < n; ++i) {
          auto tag = tag_key(r.raw(kTagSize));
          by_tag.emplace(std::move(tag), r.bytes());
        }
        r.expect_done();
        for (size_t i = 0; i < set_.size(); ++i) {
          const auto tag = tagged_hash(kDtTagDomain, unblinded_[i]);
          auto it = by_tag.find(tag_key(tag));
          if (it == by_tag.end()) continue;
          const auto k = tagged_hash(kDtKeyDomain, unblinded_[i]);
          Block16 key;
          std::copy_n(k.begin(), 16, key.begin());
          auto plain = open_once(key, it->second);
          if (!plain) throw CryptoError("record authentication failed");
          records_.emplace(set_[i], std::move(*plain));
        }
        unblinded_.clear();
        phase_ = Phase::done;
        return std::vector<Frame>{};
      });
    }
    case Phase::idle:
    case Phase::done:
      break;
  }
  unexpected(in, "no message");
}

const PsiRecords& PsiDtClient::records() const {
  if (phase_ != Phase::done) throw std::logic_error("PSI-DT client has not finished");
  return records_;
}

PsiDtServer::PsiDtServer(PsiRecords records, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng)
    : records_(std::move(records)), group_(std::move(group)), rng_(rng) {}

std::vector<Frame> PsiDtServer::handle(const Frame& in) {
  switch (phase_) {
    case Phase::await_hello:
      peer_size_ = read_hello(in, PsiProtocol::psi_dt, group_->id());
      phase_ = Phase::await_blinded;
      return {hello_frame(PsiProtocol::psi_dt, group_->id(), records_.size())};
    case Phase::await_blinded: {
      if (in.type != MessageType::blinded_batch) unexpected(in, "BLINDED_BATCH");
      return guarded([&] {
        ByteReader r(in.payload);
        auto blinded = read_elements(r, *group_);
        r.expect_done();
        if (blinded.size() != peer_size_) throw WireError("blinded batch size differs from HELLO");
        const Bytes key = group_->random_scalar(rng_);
        ByteWriter resp;
        resp.u32(static_cast<uint32_t>(blinded.size()));
        for (const auto& x : blinded) resp.raw(group_->exp(x, key));
        resp.u32(0);

        std::vector<std::pair<Digest32, Bytes>> entries;
        entries.reserve(records_.size());
        for (const auto& [s, data] : records_) {
          const Bytes prf = group_->exp(hash_element(*group_, s), key);
          const auto k = tagged_hash(kDtKeyDomain, prf);
          Block16 record_key;
          std::copy_n(k.begin(), 16, record_key.begin());
          entries.emplace_back(tagged_hash(kDtTagDomain, prf), seal_once(record_key, data));
        }
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        ByteWriter rec;
        rec.u32(static_cast<uint32_t>(entries.size()));
        for (const auto& [tag, ct] : entries) rec.raw(tag).bytes(ct);
        phase_ = Phase::done;
        return std::vector<Frame>{{MessageType::response_batch, resp.take()}, {MessageType::record_batch, rec.take()}};
      });
    }
    case Phase::done:
      break;
  }
  unexpected(in, "no message");
}

// ---- drivers ---------------------------------------------------------------

void drive(PsiSession& session, Transport& transport) {
  try {
    for (const auto& f : session.start()) transport.send(f);
    while (!session.done()) {
      const Frame in = transport.receive();
      for (const auto& f : session.handle(in)) transport.send(f);
    }
  } catch (const ProtocolAbort& e) {
    // The peer may already be gone; the abort is best effort.
    try {
      transport.send(make_abort(e.reason, e.what()));
    } catch (const WireError&) {
    }
    throw;
  }
}

RunCost run_in_process(PsiSession& client, PsiSession& server, std::vector<Frame>* transcript) {
  using clock = ThreadCpuClock;
  RunCost cost;
  std::deque<Frame> to_server;
  std::deque<Frame> to_client;
  auto timed = [](PartyCost& party, auto&& fn) {
    const auto t0 = clock::now();
    auto out = fn();
    party.seconds += std::chrono::duration<double>(clock::now() - t0).count();
    return out;
  };
  auto post = [&](std::vector<Frame> frames, PartyCost& sender, PartyCost& receiver, std::deque<Frame>& queue) {
    for (auto& f : frames) {
      sender.bytes_sent += f.wire_size();
      receiver.bytes_received += f.wire_size();
      if (transcript) transcript->push_back(f);
      queue.push_back(std::move(f));
    }
  };
  post(timed(cost.client, [&] { return client.start(); }), cost.client, cost.server, to_server);
  post(timed(cost.server, [&] { return server.start(); }), cost.server, cost.client, to_client);
  while (!client.done() || !server.done()) {
    if (!to_server.empty()) {
      Frame f = std::move(to_server.front());
      to_server.pop_front();
      post(timed(cost.server, [&] { return server.handle(f); }), cost.server, cost.client, to_client);
    } else if (!to_client.empty()) {
      Frame f = std::move(to_client.front());
      to_client.pop_front();
      post(timed(cost.client, [&] { return client.handle(f); }), cost.client, cost.server, to_server);
    } else {
      throw std::logic_error("protocol stalled with no frames in flight");
    }
  }
  return cost;
}

namespace {

std::unique_ptr<Drbg> make_rng(const PsiOptions& options, uint64_t stream) {
  if (options.seed) return std::make_unique<Drbg>(*options.seed * 0x9E3779B97F4A7C15ull + stream);
  return std::make_unique<Drbg>();
}

}  // namespace

PsiCaOutcome psi_ca(const std::vector<PsiElement>& client_set, const std::vector<PsiElement>& server_set,
                    const PsiOptions& options) {
  auto group = make_group(options.group);
  auto client_rng = make_rng(options, 1);
  auto server_rng = make_rng(options, 2);
  PsiCaClient client(client_set, group, *client_rng);
  PsiCaServer server(server_set, group, *server_rng);
  PsiCaOutcome out;
  out.cost = run_in_process(client, server);
  out.cardinality = client.cardinality();
  return out;
}

PsiDtOutcome psi_dt(const std::vector<PsiElement>& client_set, const PsiRecords& server_records,
                    const PsiOptions& options) {
  auto group = make_group(options.group);
  auto client_rng = make_rng(options, 3);
  auto server_rng = make_rng(options, 4);
  PsiDtClient client(client_set, group, *client_rng);
  PsiDtServer server(server_records, group, *server_rng);
  PsiDtOutcome out;
  out.cost = run_in_process(client, server);
  out.records = client.records();
  return out;
}

MutualPsiCaOutcome mutual_psi_ca(const std::vector<PsiElement>& a, const std::vector<PsiElement>& b,
                                 const PsiOptions& options) {
  MutualPsiCaOutcome out;
  auto first = psi_ca(a, b, options);
  PsiOptions second_options = options;
  if (second_options.seed) *second_options.seed += 1;
  auto second = psi_ca(b, a, second_options);
  out.a_learns = first.cardinality;
  out.a_as_client = first.cost;
  out.b_learns = second.cardinality;
  out.b_as_client = second.cost;
  return out;
}

MutualPsiDtOutcome mutual_psi_dt(const PsiRecords& a, const PsiRecords& b, const PsiOptions& options) {
  auto keys = [](const PsiRecords& r) {
    std::vector<PsiElement> out;
    out.reserve(r.size());
    for (const auto& [k, v] : r) out.push_back(k);
    return out;
  };
  MutualPsiDtOutcome out;
  auto first = psi_dt(keys(a), b, options);
  PsiOptions second_options = options;
  if (second_options.seed) *second_options.seed += 1;
  auto second = psi_dt(keys(b), a, second_options);
  out.a_learns = std::move(first.records);
  out.a_as_client = first.cost;
  out.b_learns = std::move(second.records);
  out.b_as_client = second.cost;
  return out;
}

}  // namespace cpb
