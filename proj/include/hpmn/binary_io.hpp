#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace hpmn::io {

// Native little-endian layout; all targets we build for are little-endian.

template <class T>
  requires std::is_arithmetic_v<T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
  requires std::is_arithmetic_v<T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("unexpected end of binary file");
  }
  return value;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::size_t max_len = 1 << 20) {
  const auto n = get<std::uint32_t>(in);
  if (n > max_len) throw std::runtime_error("string length " + std::to_string(n) + " out of range");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw std::runtime_error("unexpected end of binary file");
  return s;
}

inline void put_doubles(std::ostream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

inline void get_doubles(std::istream& in, std::span<double> values) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
    throw std::runtime_error("unexpected end of binary file");
  }
}

}  // namespace hpmn::io
