#include "dgcc/codec.hpp"

#include <zlib.h>

#include "dgcc/error.hpp"

namespace dgcc {

void ByteWriter::fixed(uint64_t v, int width) {
  for (int i = 0; i < width; ++i) {
    buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void ByteWriter::varint(uint64_t v) {
  while (v >= 0x80) {
    buf_.push_back(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  buf_.push_back(static_cast<char>(v));
}

void ByteWriter::bytes(std::string_view bytes) {
  u32(static_cast<uint32_t>(bytes.size()));
  raw(bytes);
}

uint8_t ByteReader::u8() {
  if (remaining() < 1) fail(ErrorCode::kDecode, "truncated input reading u8");
  return static_cast<uint8_t>(data_[pos_++]);
}

uint64_t ByteReader::fixed(int width) {
  if (remaining() < static_cast<size_t>(width)) {
    fail(ErrorCode::kDecode, "truncated input reading fixed-width integer");
  }
  uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<uint64_t>(static_cast<uint8_t>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += width;
  return v;
}

uint64_t ByteReader::varint() {
  uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    uint8_t b = u8();
    v |= static_cast<uint64_t>(b & 0x7f) << shift;
    if ((b & 0x80) == 0) return v;
  }
  fail(ErrorCode::kDecode, "varint longer than 10 bytes");
}

std::string_view ByteReader::raw(size_t n) {
  if (remaining() < n) fail(ErrorCode::kDecode, "truncated input reading bytes");
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::string_view ByteReader::bytes() { return raw(u32()); }

uint32_t crc32(std::string_view bytes) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; chunk to stay within range on huge payloads.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  size_t left = bytes.size();
  while (left > 0) {
    uInt n = left > (1u << 30) ? (1u << 30) : static_cast<uInt>(left);
    crc = ::crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<uint32_t>(crc);
}

void append_frame(std::string& out, std::string_view payload) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(payload.size()));
  w.raw(payload);
  w.u32(crc32(payload));
  out.append(w.str());
}

FrameRead read_frame(std::string_view data, size_t offset) noexcept {
  if (offset == data.size()) return {FrameStatus::kEnd, {}, offset};
  if (data.size() - offset < kFrameOverhead) return {FrameStatus::kTorn, {}, offset};
  auto le32 = [&](size_t at) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<uint8_t>(data[at + i])) << (8 * i);
    }
    return v;
  };
  uint64_t len = le32(offset);
  if (data.size() - offset - kFrameOverhead < len) return {FrameStatus::kTorn, {}, offset};
  auto payload = data.substr(offset + 4, len);
  if (le32(offset + 4 + len) != crc32(payload)) return {FrameStatus::kTorn, {}, offset};
  return {FrameStatus::kOk, payload, offset + kFrameOverhead + len};
}

std::string file_header(std::string_view magic, uint16_t version) {
  ByteWriter w;
  w.raw(magic);
  w.u16(version);
  return w.take();
}

std::optional<size_t> check_file_header(std::string_view data, std::string_view magic,
                                        uint16_t version) noexcept {
  size_t n = magic.size() + 2;
  if (data.size() < n || data.substr(0, magic.size()) != magic) return std::nullopt;
  uint16_t v = static_cast<uint16_t>(static_cast<uint8_t>(data[magic.size()])) |
               static_cast<uint16_t>(static_cast<uint8_t>(data[magic.size() + 1]) << 8);
  if (v != version) return std::nullopt;
  return n;
}

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kConstraint: return "constraint";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kAudit: return "audit";
    case ErrorCode::kDurability: return "durability";
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kScheduling: return "scheduling";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace dgcc
