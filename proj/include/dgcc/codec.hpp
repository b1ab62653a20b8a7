#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace dgcc {

// Little-endian fixed-width and LEB128 varint encoding used by params, log
// frames, checkpoints and trace dumps.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(uint16_t v) { fixed(v, 2); }
  void u32(uint32_t v) { fixed(v, 4); }
  void u64(uint64_t v) { fixed(v, 8); }
  void varint(uint64_t v);
  void svarint(int64_t v) {
    varint((static_cast<uint64_t>(v) << 1) ^ static_cast<uint64_t>(v >> 63));
  }
  void raw(std::string_view bytes) { buf_.append(bytes); }
  // u32 length prefix followed by the bytes.
  void bytes(std::string_view bytes);

  const std::string& str() const noexcept { return buf_; }
  std::string take() noexcept { return std::move(buf_); }
  size_t size() const noexcept { return buf_.size(); }

 private:
  void fixed(uint64_t v, int width);

  std::string buf_;
};

// Throws Error(kDecode) on truncated or malformed input.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  uint8_t u8();
  uint16_t u16() { return static_cast<uint16_t>(fixed(2)); }
  uint32_t u32() { return static_cast<uint32_t>(fixed(4)); }
  uint64_t u64() { return fixed(8); }
  uint64_t varint();
  int64_t svarint() {
    uint64_t z = varint();
    return static_cast<int64_t>((z >> 1) ^ (~(z & 1) + 1));
  }
  std::string_view raw(size_t n);
  std::string_view bytes();

  bool done() const noexcept { return pos_ == data_.size(); }
  size_t remaining() const noexcept { return data_.size() - pos_; }
  size_t position() const noexcept { return pos_; }

 private:
  uint64_t fixed(int width);

  std::string_view data_;
  size_t pos_ = 0;
};

uint32_t crc32(std::string_view bytes) noexcept;

// Frame = u32 payload length, payload, u32 CRC-32 of payload.
void append_frame(std::string& out, std::string_view payload);

enum class FrameStatus { kOk, kEnd, kTorn };

struct FrameRead {
  FrameStatus status;
  std::string_view payload;
  size_t next_offset;  // offset just past this frame when kOk
};

// Parses the frame starting at `offset`. kEnd when offset == data.size(),
// kTorn on a short frame or CRC mismatch.
FrameRead read_frame(std::string_view data, size_t offset) noexcept;

inline constexpr size_t kFrameOverhead = 8;

// File header shared by log segments, checkpoint sections and trace dumps:
// 4-byte magic followed by a u16 format version.
std::string file_header(std::string_view magic, uint16_t version);
// Returns the header size on a match, nullopt otherwise.
std::optional<size_t> check_file_header(std::string_view data, std::string_view magic,
                                        uint16_t version) noexcept;

}  // namespace dgcc
