#ifndef ICAHOC_BINARY_IO_HPP
#define ICAHOC_BINARY_IO_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/error.hpp"

namespace icahoc::io {

// Little-endian primitives for the on-disk containers. Every artifact file
// starts with an 8-byte magic and a version byte.

namespace detail {

template <typename T>
std::array<char, sizeof(T)> to_le_bytes(T value) {
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  return bytes;
}

template <typename T>
T from_le_bytes(std::array<char, sizeof(T)> bytes) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

} // namespace detail

class Writer {
public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void raw(std::string_view bytes) { out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); }

  template <typename T>
  void scalar(T value) {
    const auto bytes = detail::to_le_bytes(value);
    out_.write(bytes.data(), bytes.size());
  }

  void u8(std::uint8_t v) { scalar(v); }
  void u64(std::uint64_t v) { scalar(v); }
  void f64(double v) { scalar(v); }

  void string(std::string_view s) {
    u64(s.size());
    raw(s);
  }

  void matrix(const Eigen::MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    // row-major on disk
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }

  void vector(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }

  void index_list(const std::vector<std::size_t>& v) {
    u64(v.size());
    for (auto x : v) u64(x);
  }

private:
  std::ostream& out_;
};

class Reader {
public:
  explicit Reader(std::istream& in, std::string what = "cache") : in_(in), what_(std::move(what)) {}

  void raw(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError("unexpected end of " + what_);
  }

  template <typename T>
  T scalar() {
    std::array<char, sizeof(T)> bytes{};
    raw(bytes.data(), bytes.size());
    return detail::from_le_bytes<T>(bytes);
  }

  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  double f64() { return scalar<double>(); }

  /// Length with a sanity bound so a corrupt prefix cannot trigger a huge allocation.
  std::uint64_t length(std::uint64_t limit = (1ULL << 40)) {
    const auto n = u64();
    if (n > limit) throw DataError("corrupt " + what_ + ": implausible length " + std::to_string(n));
    return n;
  }

  std::string string() {
    const auto n = length(1ULL << 32);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  Eigen::MatrixXd matrix() {
    const auto rows = length();
    const auto cols = length();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    return m;
  }

  Eigen::VectorXd vector() {
    const auto n = length();
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
    return v;
  }

  std::vector<std::size_t> index_list() {
    const auto n = length();
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = static_cast<std::size_t>(u64());
    return v;
  }

  /// Checks the 8-byte magic and version byte.
  void expect_header(std::string_view magic, std::uint8_t version) {
    std::string got(magic.size(), '\0');
    raw(got.data(), got.size());
    if (got != magic) throw DataError("not a " + what_ + " file (bad magic)");
    const auto v = u8();
    if (v != version)
      throw DataError("unsupported " + what_ + " version " + std::to_string(v) + " (expected " +
                      std::to_string(version) + ")");
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
  std::istream& in_;
  std::string what_;
};

} // namespace icahoc::io

#endif
