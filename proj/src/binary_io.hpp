#pragma once

// Little-endian readers and writers shared by the dataset and model formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "smdn/error.hpp"

namespace smdn::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

  template <class T>
    requires std::is_arithmetic_v<T>
  void scalar(T v) {
    bytes(&v, sizeof v);
  }

  template <class T>
  void array(std::span<const T> v) {
    bytes(v.data(), v.size_bytes());
  }

  void string(const std::string& s) {
    scalar<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t n, const char* field) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(field, "file truncated");
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  T scalar(const char* field) {
    T v;
    bytes(&v, sizeof v, field);
    return v;
  }

  template <class T>
  std::vector<T> array(std::size_t n, const char* field) {
    std::vector<T> v(n);
    bytes(v.data(), n * sizeof(T), field);
    return v;
  }

  std::string string(const char* field, std::uint64_t max_len = std::uint64_t{1} << 30) {
    const auto n = scalar<std::uint64_t>(field);
    if (n > max_len) throw FormatError(field, "implausible length");
    std::string s(n, '\0');
    bytes(s.data(), n, field);
    return s;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace smdn::io
