#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "cpb/crypto.hpp"
#include "cpb/group.hpp"
#include "cpb/wire.hpp"

namespace cpb {

enum class PsiProtocol : uint8_t { psi_ca = 1, psi_dt = 2 };
enum class PsiRole { client, server };

using PsiElement = uint64_t;
using PsiRecords = std::map<PsiElement, Bytes>;

struct ProtocolAbort : std::runtime_error {
  ProtocolAbort(AbortReason reason, const std::string& what) : std::runtime_error(what), reason(reason) {}
  AbortReason reason;
};

// Message-driven protocol endpoint. Frames are accepted only in phase order;
// the input set is fixed at construction.
class PsiSession {
 public:
  virtual ~PsiSession() = default;

  // Frames to emit before anything is received.
  virtual std::vector<Frame> start() = 0;
  // Consumes one frame; returns frames to emit. Throws ProtocolAbort.
  virtual std::vector<Frame> handle(const Frame& in) = 0;
  virtual bool done() const = 0;
  virtual PsiRole role() const = 0;
};

// De Cristofaro-Gasti-Tsudik PSI-CA: the client learns |S ∩ C|, the server
// learns |C|.
class PsiCaClient final : public PsiSession {
 public:
  PsiCaClient(std::vector<PsiElement> set, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng);

  std::vector<Frame> start() override;
  std::vector<Frame> handle(const Frame& in) override;
  bool done() const override { return phase_ == Phase::done; }
  PsiRole role() const override { return PsiRole::client; }

  size_t cardinality() const;
  size_t peer_set_size() const { return peer_size_; }

 private:
  enum class Phase { idle, await_hello, await_response, done };
  std::vector<PsiElement> set_;
  std::shared_ptr<const PrimeOrderGroup> group_;
  Drbg& rng_;
  Phase phase_ = Phase::idle;
  Bytes blind_;
  size_t peer_size_ = 0;
  size_t cardinality_ = 0;
};

class PsiCaServer final : public PsiSession {
 public:
  PsiCaServer(std::vector<PsiElement> set, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng);

  std::vector<Frame> start() override { return {}; }
  std::vector<Frame> handle(const Frame& in) override;
  bool done() const override { return phase_ == Phase::done; }
  PsiRole role() const override { return PsiRole::server; }

  size_t peer_set_size() const { return peer_size_; }

 private:
  enum class Phase { await_hello, await_blinded, done };
  std::vector<PsiElement> set_;
  std::shared_ptr<const PrimeOrderGroup> group_;
  Drbg& rng_;
  Phase phase_ = Phase::await_hello;
  size_t peer_size_ = 0;
};

// OPRF-based PSI with data transfer: the client learns {(s, data_s) : s ∈ S ∩ C}.
class PsiDtClient final : public PsiSession {
 public:
  PsiDtClient(std::vector<PsiElement> set, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng);

  std::vector<Frame> start() override;
  std::vector<Frame> handle(const Frame& in) override;
  bool done() const override { return phase_ == Phase::done; }
  PsiRole role() const override { return PsiRole::client; }

  const PsiRecords& records() const;
  size_t peer_set_size() const { return peer_size_; }

 private:
  enum class Phase { idle, await_hello, await_response, await_records, done };
  std::vector<PsiElement> set_;
  std::shared_ptr<const PrimeOrderGroup> group_;
  Drbg& rng_;
  Phase phase_ = Phase::idle;
  std::vector<Bytes> blinds_;
  std::vector<Bytes> unblinded_;
  size_t peer_size_ = 0;
  PsiRecords records_;
};

class PsiDtServer final : public PsiSession {
 public:
  PsiDtServer(PsiRecords records, std::shared_ptr<const PrimeOrderGroup> group, Drbg& rng);

  std::vector<Frame> start() override { return {}; }
  std::vector<Frame> handle(const Frame& in) override;
  bool done() const override { return phase_ == Phase::done; }
  PsiRole role() const override { return PsiRole::server; }

  size_t peer_set_size() const { return peer_size_; }

 private:
  enum class Phase { await_hello, await_blinded, done };
  PsiRecords records_;
  std::shared_ptr<const PrimeOrderGroup> group_;
  Drbg& rng_;
  Phase phase_ = Phase::await_hello;
  size_t peer_size_ = 0;
};

Frame make_abort(AbortReason reason, const std::string& detail);

// Runs a session against a transport until it completes. On ProtocolAbort an
// ABORT frame is sent before rethrowing.
void drive(PsiSession& session, Transport& transport);

struct PartyCost {
  uint64_t bytes_sent = 0;
  uint64_t bytes_received = 0;
  // Thread CPU time.
  double seconds = 0.0;
};

struct RunCost {
  PartyCost client;
  PartyCost server;
  uint64_t total_bytes() const { return client.bytes_sent + server.bytes_sent; }
};

// Steps a client/server pair in-process, measuring bytes and compute time
// per party. When `transcript` is set every frame is appended to it.
RunCost run_in_process(PsiSession& client, PsiSession& server, std::vector<Frame>* transcript = nullptr);

struct PsiOptions {
  GroupId group = GroupId::ristretto255;
  // Reproducible transcripts for tests; production uses system entropy.
  std::optional<uint64_t> seed;
};

struct PsiCaOutcome {
  size_t cardinality = 0;
  RunCost cost;
};

struct PsiDtOutcome {
  PsiRecords records;
  RunCost cost;
};

PsiCaOutcome psi_ca(const std::vector<PsiElement>& client_set, const std::vector<PsiElement>& server_set,
                    const PsiOptions& options = {});
PsiDtOutcome psi_dt(const std::vector<PsiElement>& client_set, const PsiRecords& server_records,
                    const PsiOptions& options = {});

struct MutualPsiCaOutcome {
  size_t a_learns = 0;
  size_t b_learns = 0;
  RunCost a_as_client;
  RunCost b_as_client;
};

struct MutualPsiDtOutcome {
  PsiRecords a_learns;
  PsiRecords b_learns;
  RunCost a_as_client;
  RunCost b_as_client;
};

// Two executions with roles inverted.
MutualPsiCaOutcome mutual_psi_ca(const std::vector<PsiElement>& a, const std::vector<PsiElement>& b,
                                 const PsiOptions& options = {});
MutualPsiDtOutcome mutual_psi_dt(const PsiRecords& a, const PsiRecords& b, const PsiOptions& options = {});

}  // namespace cpb
