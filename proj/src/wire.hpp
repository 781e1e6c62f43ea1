#pragma once

#include "tangled/types.hpp"

#include <bit>
#include <cstdint>
#include <string>

// Little-endian byte codecs shared by the dataset and checkpoint formats.
namespace tangled::wire {

inline void put_u32(std::string& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_i32(std::string& b, int32_t v) { put_u32(b, uint32_t(v)); }
inline void put_i64(std::string& b, int64_t v) { put_u64(b, uint64_t(v)); }
inline void put_f64(std::string& b, double v) { put_u64(b, std::bit_cast<uint64_t>(v)); }

class Cursor {
 public:
  Cursor(const std::string& data, std::string origin)
      : data_(data), origin_(std::move(origin)) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  const char* take(size_t n) {
    if (remaining() < n)
      throw ParseError(origin_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                       std::to_string(n) + " more bytes)");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  uint32_t get_u32() {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(take(4));
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    return v;
  }

  uint64_t get_u64() {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(take(8));
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
  }

  int32_t get_i32() { return int32_t(get_u32()); }
  int64_t get_i64() { return int64_t(get_u64()); }
  double get_f64() { return std::bit_cast<double>(get_u64()); }

  // reads through the next '\n', exclusive
  std::string get_line() {
    size_t nl = data_.find('\n', pos_);
    if (nl == std::string::npos)
      throw ParseError(origin_ + ": missing line terminator at byte " + std::to_string(pos_));
    std::string line = data_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return line;
  }

 private:
  const std::string& data_;
  std::string origin_;
  size_t pos_ = 0;
};

}  // namespace tangled::wire
