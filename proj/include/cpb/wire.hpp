#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "cpb/crypto.hpp"

namespace cpb {

// Frame layout: 4-byte big-endian payload length, 1-byte type tag, payload.
enum class MessageType : uint8_t {
  hello = 1,
  blinded_batch = 2,
  response_batch = 3,
  record_batch = 4,
  abort = 5,
  submission = 16,
  buffer_delivery = 17,
};

enum class AbortReason : uint8_t {
  unexpected_message = 1,
  malformed_message = 2,
  group_mismatch = 3,
  protocol_mismatch = 4,
  crypto_failure = 5,
};

std::string to_string(MessageType type);

inline constexpr size_t kFrameHeaderSize = 5;
inline constexpr uint32_t kMaxPayload = 1u << 30;

struct Frame {
  MessageType type = MessageType::abort;
  Bytes payload;

  size_t wire_size() const { return kFrameHeaderSize + payload.size(); }
  bool operator==(const Frame&) const = default;
};

Bytes encode_frame(const Frame& frame);

struct WireError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incremental decoder: feed bytes, pop complete frames.
class FrameDecoder {
 public:
  void feed(std::span<const uint8_t> data);
  std::optional<Frame> next();
  size_t buffered() const { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  size_t offset_ = 0;
};

class ByteWriter {
 public:
  ByteWriter& u8(uint8_t v);
  ByteWriter& u16(uint16_t v);
  ByteWriter& u32(uint32_t v);
  ByteWriter& u64(uint64_t v);
  ByteWriter& raw(std::span<const uint8_t> data);
  // u32 length prefix.
  ByteWriter& bytes(std::span<const uint8_t> data);
  // u16 length prefix.
  ByteWriter& str(const std::string& s);

  Bytes take() { return std::move(out_); }
  size_t size() const { return out_.size(); }

 private:
  Bytes out_;
};

// Throws WireError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  std::span<const uint8_t> raw(size_t n);
  Bytes bytes();
  std::string str();

  bool done() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }
  void expect_done() const;

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

struct TransportStats {
  uint64_t bytes_sent = 0;
  uint64_t bytes_received = 0;
  uint64_t frames_sent = 0;
  uint64_t frames_received = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Frame& frame) = 0;
  // Blocks until a frame arrives; throws WireError on a closed peer.
  virtual Frame receive() = 0;
  const TransportStats& stats() const { return stats_; }

 protected:
  TransportStats stats_;
};

// In-process duplex channel backed by two locked queues of encoded bytes.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_channel();

// Transport over a connected stream file descriptor; takes ownership.
class FdTransport final : public Transport {
 public:
  explicit FdTransport(int fd);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void send(const Frame& frame) override;
  Frame receive() override;

 private:
  int fd_;
  FrameDecoder decoder_;
};

// A connected AF_UNIX socket pair wrapped as transports.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_socket_pair();

}  // namespace cpb
