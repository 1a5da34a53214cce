#pragma once

// Little-endian primitive encoding shared by the model and policy files.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "iqrl/error.hpp"

namespace iqrl::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { v = to_little(v); bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { v = to_little(v); bytes(&v, sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f64s(const std::vector<double>& values) {
    for (double v : values) f64(v);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CorruptFileError(what_ + ": unexpected end of file (truncated or corrupt)");
    }
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return to_little(v);
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return to_little(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t limit = 1u << 28) {
    const std::uint32_t n = u32();
    if (n > limit) throw CorruptFileError(what_ + ": string length " + std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> values(n);
    for (double& v : values) v = f64();
    return values;
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw CorruptFileError(what_ + ": trailing bytes after payload");
  }
  const std::string& what() const { return what_; }

 private:
  std::istream& in_;
  std::string what_;
};

inline void write_magic(Writer& w, const char (&magic)[9], std::uint32_t version) {
  w.bytes(magic, 8);
  w.u32(version);
}

inline void read_magic(Reader& r, const char (&magic)[9], std::uint32_t version) {
  char got[8];
  r.bytes(got, 8);
  if (std::memcmp(got, magic, 8) != 0) throw CorruptFileError(r.what() + ": bad magic, not a " + std::string(magic, 8) + " file");
  const std::uint32_t v = r.u32();
  if (v != version) {
    throw VersionMismatchError(r.what() + ": format version " + std::to_string(v) + ", expected " +
                               std::to_string(version));
  }
}

}  // namespace iqrl::io
