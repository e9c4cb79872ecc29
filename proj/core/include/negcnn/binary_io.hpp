#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negcnn/errors.hpp"

// Little-endian byte buffers shared by the dataset cache and checkpoint formats.
namespace negcnn::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void bytes(std::string_view s) { raw(s.data(), s.size()); }
  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  template <typename T>
  void array(std::span<const T> values) {
    raw(values.data(), values.size_bytes());
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }

  const std::vector<std::uint8_t>& buffer() const noexcept { return buffer_; }
  std::vector<std::uint8_t>& buffer() noexcept { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

// Every read past the end throws FormatError carrying the current offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data, std::string what = "file")
      : data_(data), what_(std::move(what)) {}

  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  std::int32_t i32() { return scalar<std::int32_t>(); }
  double f64() { return scalar<double>(); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + offset_), n);
    offset_ += n;
    return s;
  }
  std::string string(std::size_t max_len = 1u << 24) {
    const std::uint32_t n = u32();
    if (n > max_len) fail("string length " + std::to_string(n) + " exceeds limit");
    return bytes(n);
  }
  template <typename T>
  std::vector<T> array(std::size_t count) {
    if (count > remaining() / sizeof(T)) fail("truncated array of " + std::to_string(count));
    std::vector<T> out(count);
    std::memcpy(out.data(), data_.data() + offset_, count * sizeof(T));
    offset_ += count * sizeof(T);
    return out;
  }

  std::size_t offset() const noexcept { return offset_; }
  std::size_t remaining() const noexcept { return data_.size() - offset_; }
  [[noreturn]] void fail(const std::string& why) const { throw FormatError(what_ + ": " + why, offset_); }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) fail("unexpected end of data");
  }
  template <typename T>
  T scalar() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::string what_;
  std::size_t offset_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
// Writes to a sibling temporary file and renames it into place, so a failed
// write never leaves a partial file at `path`.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::string& path, std::string_view text);
std::uint32_t crc32(std::span<const std::uint8_t> bytes);
// Continues a running checksum: crc32(b, crc32(a)) == crc32(a ++ b).
std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t previous);

}  // namespace negcnn::io
