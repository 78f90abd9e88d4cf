#include "cpb/server_aided.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace cpb {

namespace {

constexpr size_t kRecordPlaintextSize = 7;

struct BlockHash {
  size_t operator()(const Block16& b) const noexcept {
    uint64_t v;
    std::memcpy(&v, b.data(), sizeof v);
    return static_cast<size_t>(v);
  }
};

Bytes record_plaintext(Subnet24 source, int32_t day) {
  ByteWriter w;
  const uint32_t s = source.value();
  w.u8(static_cast<uint8_t>(s >> 16)).u8(static_cast<uint8_t>(s >> 8)).u8(static_cast<uint8_t>(s));
  w.u32(static_cast<uint32_t>(day));
  return w.take();
}

}  // namespace

PrpKey PrpKey::generate(Drbg& rng) {
  PrpKey k;
  rng.fill(k.bytes);
  return k;
}

Block16 encode_occurrence(Subnet24 source, uint32_t counter) {
  Block16 b{};
  const uint32_t s = source.value();
  b[0] = static_cast<uint8_t>(s >> 16);
  b[1] = static_cast<uint8_t>(s >> 8);
  b[2] = static_cast<uint8_t>(s);
  b[3] = static_cast<uint8_t>(counter >> 24);
  b[4] = static_cast<uint8_t>(counter >> 16);
  b[5] = static_cast<uint8_t>(counter >> 8);
  b[6] = static_cast<uint8_t>(counter);
  return b;
}

Block16 derive_record_key(const PrpKey& key, Subnet24 source, uint32_t counter) {
  // Keyed so that the STA cannot enumerate the 2^24 sources and open records.
  std::array<uint8_t, 32> input{};
  const Block16 block = encode_occurrence(source, counter);
  std::copy(key.bytes.begin(), key.bytes.end(), input.begin());
  std::copy(block.begin(), block.end(), input.begin() + 16);
  const Digest32 d = sha256(input);
  Block16 out;
  std::copy_n(d.begin(), out.size(), out.begin());
  return out;
}

EncryptedDataset encrypt_dataset(const OrgLog& log, const PrpKey& key) {
  std::vector<size_t> order(log.events.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return log.events[a].day < log.events[b].day; });

  const Aes128Prp prp(key.bytes);
  EncryptedDataset out;
  out.submission.org = log.org;
  out.keys.org = log.org;
  out.submission.labels.reserve(order.size());
  out.submission.ciphertexts.reserve(order.size());
  out.keys.occurrences.reserve(order.size());
  out.keys.keys.reserve(order.size());

  std::unordered_map<Subnet24, uint32_t> counters;
  for (size_t idx : order) {
    const AttackEvent& e = log.events[idx];
    const uint32_t cnt = ++counters[e.source];
    const Block16 record_key = derive_record_key(key, e.source, cnt);
    out.submission.labels.push_back(prp.permute(encode_occurrence(e.source, cnt)));
    out.submission.ciphertexts.push_back(seal_once(record_key, record_plaintext(e.source, e.day)));
    out.keys.occurrences.push_back({e.source, cnt});
    out.keys.keys.push_back(record_key);
  }
  return out;
}

size_t StaBuffer::index_of(const OrgId& org) const {
  const auto& orgs = o2o.orgs();
  auto it = std::find(orgs.begin(), orgs.end(), org);
  if (it == orgs.end()) throw std::out_of_range("unknown organization: " + org);
  return static_cast<size_t>(it - orgs.begin());
}

void StaServer::submit(LabeledSet submission) {
  if (submission.labels.size() != submission.ciphertexts.size()) {
    throw std::invalid_argument("submission labels and ciphertexts differ in length");
  }
  for (const auto& s : submitted_) {
    if (s.org == submission.org) throw std::invalid_argument("duplicate submission from " + submission.org);
  }
  submitted_.push_back(std::move(submission));
}

StaBuffer StaServer::compute() const {
  const size_t n = submitted_.size();
  std::vector<OrgId> orgs;
  orgs.reserve(n);
  size_t total = 0;
  for (const auto& s : submitted_) {
    orgs.push_back(s.org);
    total += s.size();
  }

  struct Holder {
    uint32_t org;
    uint32_t index;
  };
  std::unordered_map<Block16, std::vector<Holder>, BlockHash> index;
  index.reserve(total);
  for (uint32_t i = 0; i < n; ++i) {
    const auto& labels = submitted_[i].labels;
    for (uint32_t m = 0; m < labels.size(); ++m) index[labels[m]].push_back({i, m});
  }

  StaBuffer out;
  out.o2o = O2OMatrix(orgs);
  out.buffers.assign(n, std::vector<std::vector<BufferedRecord>>(n));
  std::vector<uint64_t> common(n);
  for (uint32_t i = 0; i < n; ++i) {
    std::fill(common.begin(), common.end(), 0);
    const auto& labels = submitted_[i].labels;
    for (uint32_t l = 0; l < labels.size(); ++l) {
      for (const Holder& h : index.at(labels[l])) {
        ++common[h.org];
        if (h.org != i) out.buffers[i][h.org].push_back({l, submitted_[h.org].ciphertexts[h.index]});
      }
    }
    for (uint32_t j = 0; j < n; ++j) {
      if (j >= i) out.o2o.set(i, j, common[j]);
    }
  }
  return out;
}

StaBuffer sta_o2o(std::vector<LabeledSet> submissions) {
  StaServer sta;
  for (auto& s : submissions) sta.submit(std::move(s));
  return sta.compute();
}

BufferDelivery deliver(const StaBuffer& sta, std::span<const size_t> cluster, size_t recipient) {
  BufferDelivery out;
  out.recipient = sta.o2o.orgs().at(recipient);
  for (size_t peer : cluster) {
    if (peer == recipient) continue;
    out.peers.push_back({sta.o2o.orgs().at(peer), sta.buffer(recipient, peer)});
  }
  return out;
}

std::vector<AttackEvent> log_sharing(const BufferDelivery& delivery, const RecordKeyStore& keys) {
  if (delivery.recipient != keys.org) throw SharingError("delivery addressed to " + delivery.recipient);
  std::vector<AttackEvent> out;
  for (const auto& peer : delivery.peers) {
    for (const auto& rec : peer.records) {
      if (rec.index >= keys.keys.size()) throw SharingError("record index out of range");
      const auto plain = open_once(keys.keys[rec.index], rec.ciphertext);
      if (!plain) throw SharingError("record from " + peer.peer + " failed authentication");
      if (plain->size() != kRecordPlaintextSize) throw SharingError("record has wrong length");
      ByteReader r(*plain);
      const uint32_t hi = r.u8(), mid = r.u8(), lo = r.u8();
      const Subnet24 source((hi << 16) | (mid << 8) | lo);
      const auto day = static_cast<int32_t>(r.u32());
      if (source != keys.occurrences[rec.index].source) {
        throw SharingError("record from " + peer.peer + " does not match its label");
      }
      out.push_back({day, peer.peer, source});
    }
  }
  return out;
}

Frame encode_submission(const LabeledSet& submission) {
  ByteWriter w;
  w.str(submission.org).u32(static_cast<uint32_t>(submission.size()));
  for (size_t i = 0; i < submission.size(); ++i) {
    w.raw(submission.labels[i]).bytes(submission.ciphertexts[i]);
  }
  return {MessageType::submission, w.take()};
}

LabeledSet decode_submission(const Frame& frame) {
  if (frame.type != MessageType::submission) throw WireError("expected SUBMISSION, got " + to_string(frame.type));
  ByteReader r(frame.payload);
  LabeledSet out;
  out.org = r.str();
  const uint32_t count = r.u32();
  if (count > r.remaining() / (16 + 4)) throw WireError("submission count exceeds payload");
  out.labels.resize(count);
  out.ciphertexts.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    auto label = r.raw(16);
    std::copy(label.begin(), label.end(), out.labels[i].begin());
    out.ciphertexts[i] = r.bytes();
  }
  r.expect_done();
  return out;
}

Frame encode_delivery(const BufferDelivery& delivery) {
  ByteWriter w;
  w.str(delivery.recipient).u32(static_cast<uint32_t>(delivery.peers.size()));
  for (const auto& peer : delivery.peers) {
    w.str(peer.peer).u32(static_cast<uint32_t>(peer.records.size()));
    for (const auto& rec : peer.records) w.u32(rec.index).bytes(rec.ciphertext);
  }
  return {MessageType::buffer_delivery, w.take()};
}

BufferDelivery decode_delivery(const Frame& frame) {
  if (frame.type != MessageType::buffer_delivery) {
    throw WireError("expected BUFFER_DELIVERY, got " + to_string(frame.type));
  }
  ByteReader r(frame.payload);
  BufferDelivery out;
  out.recipient = r.str();
  const uint32_t peers = r.u32();
  if (peers > r.remaining() / 6) throw WireError("peer count exceeds payload");
  out.peers.resize(peers);
  for (auto& peer : out.peers) {
    peer.peer = r.str();
    const uint32_t count = r.u32();
    if (count > r.remaining() / 8) throw WireError("record count exceeds payload");
    peer.records.resize(count);
    for (auto& rec : peer.records) {
      rec.index = r.u32();
      rec.ciphertext = r.bytes();
    }
  }
  r.expect_done();
  return out;
}

}  // namespace cpb
