#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpb/corpus.hpp"
#include "cpb/crypto.hpp"
#include "cpb/o2o.hpp"
#include "cpb/wire.hpp"

namespace cpb {

// Secret PRP key shared by all organizations and never sent to the STA.
struct PrpKey {
  Block16 bytes{};

  static PrpKey generate(Drbg& rng);
};

// What an organization submits: PRP labels and index-aligned ciphertexts.
struct LabeledSet {
  OrgId org;
  std::vector<Block16> labels;
  std::vector<Bytes> ciphertexts;

  size_t size() const { return labels.size(); }
  bool operator==(const LabeledSet&) const = default;
};

struct LabeledOccurrence {
  Subnet24 source;
  uint32_t counter = 0;
};

// What an organization keeps: for each label position, the (element, counter)
// it encodes and the record key derived from it.
struct RecordKeyStore {
  OrgId org;
  std::vector<LabeledOccurrence> occurrences;
  std::vector<Block16> keys;
};

struct EncryptedDataset {
  LabeledSet submission;
  RecordKeyStore keys;
};

// 24-bit source, 32-bit counter, zero padding to one 128-bit block.
Block16 encode_occurrence(Subnet24 source, uint32_t counter);
Block16 derive_record_key(const PrpKey& key, Subnet24 source, uint32_t counter);

// Occurrences are numbered per source in (day, insertion) order, starting at 1.
EncryptedDataset encrypt_dataset(const OrgLog& log, const PrpKey& key);

struct BufferedRecord {
  // Position in the recipient's own labeled set.
  uint32_t index = 0;
  Bytes ciphertext;

  bool operator==(const BufferedRecord&) const = default;
};

// Everything the STA holds after O2O computation.
struct StaBuffer {
  O2OMatrix o2o;
  // buffers[i][j]: records of org j at labels also held by org i.
  std::vector<std::vector<std::vector<BufferedRecord>>> buffers;

  size_t index_of(const OrgId& org) const;
  const std::vector<BufferedRecord>& buffer(size_t recipient, size_t peer) const { return buffers[recipient][peer]; }
};

class StaServer {
 public:
  // Throws std::invalid_argument on a second submission from the same org.
  void submit(LabeledSet submission);
  size_t submissions() const { return submitted_.size(); }
  uint64_t bytes_received() const { return bytes_received_; }
  void account_bytes(uint64_t n) { bytes_received_ += n; }

  // Label intersections through one hash index over all submitted labels.
  StaBuffer compute() const;

 private:
  std::vector<LabeledSet> submitted_;
  uint64_t bytes_received_ = 0;
};

// One-shot helper: submit all and compute.
StaBuffer sta_o2o(std::vector<LabeledSet> submissions);

struct PeerRecords {
  OrgId peer;
  std::vector<BufferedRecord> records;
};

struct BufferDelivery {
  OrgId recipient;
  std::vector<PeerRecords> peers;
};

// Buffers for `recipient` from every other member of `cluster` (indices into
// the STA's org order).
BufferDelivery deliver(const StaBuffer& sta, std::span<const size_t> cluster, size_t recipient);

struct SharingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Decrypts delivered records with the recipient's own keys. Recovered events
// carry the peer as victim and the peer's original day.
std::vector<AttackEvent> log_sharing(const BufferDelivery& delivery, const RecordKeyStore& keys);

Frame encode_submission(const LabeledSet& submission);
LabeledSet decode_submission(const Frame& frame);
Frame encode_delivery(const BufferDelivery& delivery);
BufferDelivery decode_delivery(const Frame& frame);

}  // namespace cpb
