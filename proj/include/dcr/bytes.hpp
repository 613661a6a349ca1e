#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "dcr/errors.hpp"

namespace dcr {

using Bytes = std::vector<uint8_t>;

inline Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

// Little-endian primitive codec shared by the image format and the wire
// protocol. All multi-byte integers in every on-disk and on-wire structure
// go through these two classes.
class ByteWriter {
 public:
  const Bytes& data() const { return buf_; }
  Bytes take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; i++) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; i++) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  void raw(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void raw(const Bytes& b) { raw(b.data(), b.size()); }
  void blob(const Bytes& b) {  // u64 length prefix
    u64(b.size());
    raw(b);
  }
  void str(const std::string& s) {
    u32(uint32_t(s.size()));
    raw(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}
  explicit ByteReader(const Bytes& b) : ByteReader(b.data(), b.size()) {}

  size_t remaining() const { return n_ - off_; }
  bool done() const { return off_ == n_; }

  uint8_t u8() {
    need(1);
    return p_[off_++];
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= uint32_t(p_[off_ + i]) << (8 * i);
    off_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= uint64_t(p_[off_ + i]) << (8 * i);
    off_ += 8;
    return v;
  }
  Bytes raw(size_t n) {
    need(n);
    Bytes b(p_ + off_, p_ + off_ + n);
    off_ += n;
    return b;
  }
  Bytes blob() {
    uint64_t n = u64();
    need(n);
    return raw(size_t(n));
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + off_), n);
    off_ += n;
    return s;
  }

 private:
  void need(uint64_t n) const {
    if (off_ + n > n_) fail(Errc::TruncatedSection, "input ends mid-field");
  }
  const uint8_t* p_;
  size_t n_;
  size_t off_ = 0;
};

}  // namespace dcr
