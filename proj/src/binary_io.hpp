#pragma once

// Little-endian primitives shared by the embedding and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ces/error.hpp"

namespace ces::binio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
U byteswap_if_big(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
    std::memcpy(&v, b, sizeof(U));
  }
  return v;
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_bytes(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_f32(std::ostream& out, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(data[i]);
      write_u32(out, bits);
    }
  }
}

class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void read_raw(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw InputError(what_ + ": truncated file");
  }

  std::uint32_t u32() {
    std::uint32_t v;
    read_raw(reinterpret_cast<char*>(&v), sizeof v);
    return byteswap_if_big(v);
  }

  std::string bytes(std::size_t limit = 1u << 24) {
    const auto n = u32();
    if (n > limit) throw InputError(what_ + ": implausible string length " + std::to_string(n));
    std::string s(n, '\0');
    read_raw(s.data(), n);
    return s;
  }

  void f32(float* dst, std::size_t n) {
    read_raw(reinterpret_cast<char*>(dst), n * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = std::bit_cast<float>(byteswap_if_big(std::bit_cast<std::uint32_t>(dst[i])));
      }
    }
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::string& what() const { return what_; }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace ces::binio
