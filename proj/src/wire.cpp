#include "cpb/wire.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace cpb {

std::string to_string(MessageType type) {
  switch (type) {
    case MessageType::hello:
      return "HELLO";
    case MessageType::blinded_batch:
      return "BLINDED_BATCH";
    case MessageType::response_batch:
      return "RESPONSE_BATCH";
    case MessageType::record_batch:
      return "RECORD_BATCH";
    case MessageType::abort:
      return "ABORT";
    case MessageType::submission:
      return "SUBMISSION";
    case MessageType::buffer_delivery:
      return "BUFFER_DELIVERY";
  }
  return "UNKNOWN(" + std::to_string(static_cast<int>(type)) + ")";
}

Bytes encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw WireError("frame payload too large");
  ByteWriter w;
  w.u32(static_cast<uint32_t>(frame.payload.size())).u8(static_cast<uint8_t>(frame.type)).raw(frame.payload);
  return w.take();
}

void FrameDecoder::feed(std::span<const uint8_t> data) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), data.begin(), data.end());
}

std::optional<Frame> FrameDecoder::next() {
  if (buffered() < kFrameHeaderSize) return std::nullopt;
  ByteReader header(std::span<const uint8_t>(buffer_).subspan(offset_, kFrameHeaderSize));
  const uint32_t length = header.u32();
  const uint8_t tag = header.u8();
  if (length > kMaxPayload) throw WireError("frame length exceeds limit");
  if (buffered() < kFrameHeaderSize + length) return std::nullopt;
  Frame f;
  f.type = static_cast<MessageType>(tag);
  const auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(offset_ + kFrameHeaderSize);
  f.payload.assign(begin, begin + length);
  offset_ += kFrameHeaderSize + length;
  if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  return f;
}

ByteWriter& ByteWriter::u8(uint8_t v) {
  out_.push_back(v);
  return *this;
}

ByteWriter& ByteWriter::u16(uint16_t v) {
  out_.push_back(static_cast<uint8_t>(v >> 8));
  out_.push_back(static_cast<uint8_t>(v));
  return *this;
}

ByteWriter& ByteWriter::u32(uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<uint8_t>(v >> shift));
  return *this;
}

ByteWriter& ByteWriter::u64(uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<uint8_t>(v >> shift));
  return *this;
}

ByteWriter& ByteWriter::raw(std::span<const uint8_t> data) {
  out_.insert(out_.end(), data.begin(), data.end());
  return *this;
}

ByteWriter& ByteWriter::bytes(std::span<const uint8_t> data) {
  if (data.size() > UINT32_MAX) throw WireError("byte string too long");
  u32(static_cast<uint32_t>(data.size()));
  return raw(data);
}

ByteWriter& ByteWriter::str(const std::string& s) {
  if (s.size() > UINT16_MAX) throw WireError("string too long");
  u16(static_cast<uint16_t>(s.size()));
  return raw(std::span(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

std::span<const uint8_t> ByteReader::raw(size_t n) {
  if (remaining() < n) throw WireError("truncated message");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

uint8_t ByteReader::u8() { return raw(1)[0]; }

uint16_t ByteReader::u16() {
  auto b = raw(2);
  return static_cast<uint16_t>((b[0] << 8) | b[1]);
}

uint32_t ByteReader::u32() {
  auto b = raw(4);
  uint32_t v = 0;
  for (uint8_t x : b) v = (v << 8) | x;
  return v;
}

uint64_t ByteReader::u64() {
  auto b = raw(8);
  uint64_t v = 0;
  for (uint8_t x : b) v = (v << 8) | x;
  return v;
}

Bytes ByteReader::bytes() {
  const uint32_t n = u32();
  auto b = raw(n);
  return {b.begin(), b.end()};
}

std::string ByteReader::str() {
  const uint16_t n = u16();
  auto b = raw(n);
  return {b.begin(), b.end()};
}

void ByteReader::expect_done() const {
  if (!done()) throw WireError("trailing bytes in message");
}

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> queue;
  bool closed = false;
};

class MemoryTransport final : public Transport {
 public:
  MemoryTransport(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in) : out_(std::move(out)), in_(std::move(in)) {}

  ~MemoryTransport() override {
    std::lock_guard lock(out_->mu);
    out_->closed = true;
    out_->cv.notify_all();
  }

  void send(const Frame& frame) override {
    auto bytes = encode_frame(frame);
    stats_.bytes_sent += bytes.size();
    ++stats_.frames_sent;
    std::lock_guard lock(out_->mu);
    out_->queue.push_back(std::move(bytes));
    out_->cv.notify_all();
  }

  Frame receive() override {
    while (true) {
      if (auto f = decoder_.next()) {
        stats_.bytes_received += f->wire_size();
        ++stats_.frames_received;
        return std::move(*f);
      }
      Bytes chunk;
      {
        std::unique_lock lock(in_->mu);
        in_->cv.wait(lock, [&] { return !in_->queue.empty() || in_->closed; });
        if (in_->queue.empty()) throw WireError("peer closed the channel");
        chunk = std::move(in_->queue.front());
        in_->queue.pop_front();
      }
      decoder_.feed(chunk);
    }
  }

 private:
  std::shared_ptr<Pipe> out_;
  std::shared_ptr<Pipe> in_;
  FrameDecoder decoder_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_memory_channel() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<MemoryTransport>(a_to_b, b_to_a), std::make_unique<MemoryTransport>(b_to_a, a_to_b)};
}

FdTransport::FdTransport(int fd) : fd_(fd) {}

FdTransport::~FdTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void FdTransport::send(const Frame& frame) {
  auto bytes = encode_frame(frame);
  size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::write(fd_, bytes.data() + off, bytes.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw WireError(std::string("write failed: ") + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
  stats_.bytes_sent += bytes.size();
  ++stats_.frames_sent;
}

Frame FdTransport::receive() {
  uint8_t buf[1 << 16];
  while (true) {
    if (auto f = decoder_.next()) {
      stats_.bytes_received += f->wire_size();
      ++stats_.frames_received;
      return std::move(*f);
    }
    const ssize_t n = ::read(fd_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw WireError(std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) throw WireError("peer closed the connection");
    decoder_.feed(std::span(buf, static_cast<size_t>(n)));
  }
}

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw WireError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  return {std::make_unique<FdTransport>(fds[0]), std::make_unique<FdTransport>(fds[1])};
}

}  // namespace cpb
