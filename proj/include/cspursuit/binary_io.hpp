#pragma once

// Vector files: an unsigned 64-bit little-endian element count followed by
// that many IEEE-754 binary64 values, little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "cspursuit/error.hpp"

namespace csp {

namespace detail {
template <class T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}
}  // namespace detail

inline void write_vector(std::ostream& out, std::span<const double> v) {
  const auto count = detail::to_little_endian<std::uint64_t>(v.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (double x : v) {
    const auto le = detail::to_little_endian(x);
    out.write(reinterpret_cast<const char*>(&le), sizeof le);
  }
  if (!out) throw Error("write_vector: stream failure");
}

inline std::vector<double> read_vector(std::istream& in) {
  std::uint64_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) throw Error("read_vector: missing length prefix");
  count = detail::to_little_endian(count);
  std::vector<double> v(count);
  for (auto& x : v) {
    double le;
    if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) throw Error("read_vector: truncated payload");
    x = detail::to_little_endian(le);
  }
  return v;
}

inline void write_vector_file(const std::filesystem::path& path, std::span<const double> v) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_vector(out, v);
}

inline std::vector<double> read_vector_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_vector(in);
}

}  // namespace csp
