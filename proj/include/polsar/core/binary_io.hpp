#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>

#include "polsar/core/error.hpp"
#include "polsar/core/tensor.hpp"

namespace polsar::io {

/// Little-endian writer over an ostream.
class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), n); }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }

  template <class U>
  void put(U v) {
    static_assert(std::is_arithmetic_v<U>);
    unsigned char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(buf[i], buf[sizeof(U) - 1 - i]);
    bytes(buf, sizeof(U));
  }

  void cstring(std::string_view s) {
    bytes(s.data(), s.size());
    put<std::uint8_t>(0);
  }

 private:
  std::ostream& os_;
};

/// Little-endian reader that reports the byte offset of any failure.
class Reader {
 public:
  Reader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

  std::uint64_t offset() const { return offset_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(context_ + ": " + what + " at byte offset " + std::to_string(offset_));
  }

  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) fail("unexpected end of file");
    offset_ += n;
  }

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    bytes(got.data(), got.size());
    if (got != m) {
      offset_ -= m.size();
      fail("bad magic (expected \"" + std::string(m) + "\")");
    }
  }

  template <class U>
  U get() {
    static_assert(std::is_arithmetic_v<U>);
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(buf[i], buf[sizeof(U) - 1 - i]);
    U v;
    std::memcpy(&v, buf, sizeof(U));
    return v;
  }

  std::string cstring(std::size_t max_len = 4096) {
    std::string s;
    for (;;) {
      const auto c = get<std::uint8_t>();
      if (c == 0) return s;
      if (s.size() >= max_len) fail("unterminated string");
      s.push_back(static_cast<char>(c));
    }
  }

  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
  std::string context_;
  std::uint64_t offset_ = 0;
};

inline constexpr std::string_view kTensorMagic = "PTNSR1";

/// Tensor record: "PTNSR1", u8 precision (1 single, 2 double), u8 rank,
/// u32 extents[rank], raw little-endian scalars.
template <class T>
void write_tensor(Writer& w, const Tensor<T>& t) {
  w.magic(kTensorMagic);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(precision_of<T>()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(t.shape().rank()));
  for (auto d : t.shape().dims()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  if constexpr (std::endian::native == std::endian::little) {
    w.bytes(t.data(), t.size() * sizeof(T));
  } else {
    for (auto v : t.span()) w.put<T>(v);
  }
}

/// Reads a tensor of either stored precision and converts to T.
template <class T>
Tensor<T> read_tensor(Reader& r) {
  r.expect_magic(kTensorMagic);
  const auto prec = r.get<std::uint8_t>();
  if (prec != 1 && prec != 2) r.fail("unknown precision code " + std::to_string(prec));
  const auto rank = r.get<std::uint8_t>();
  if (rank == 0 || rank > 8) r.fail("unsupported rank " + std::to_string(rank));
  std::vector<std::size_t> dims(rank);
  std::size_t total = 1;
  for (auto& d : dims) {
    d = r.get<std::uint32_t>();
    if (d == 0) r.fail("zero extent");
    total *= d;
    if (total > (std::size_t{1} << 34)) r.fail("tensor too large");
  }
  std::vector<T> data(total);
  for (auto& v : data) v = prec == 1 ? static_cast<T>(r.get<float>()) : static_cast<T>(r.get<double>());
  return Tensor<T>(Shape(std::move(dims)), std::move(data));
}

/// Write through a temporary sibling file and rename on success so that a
/// failed command never leaves a partial output behind.
template <class Fn>
void write_file_atomic(const std::filesystem::path& path, Fn&& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + tmp.string() + " for writing");
    try {
      body(os);
    } catch (...) {
      os.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
    os.flush();
    if (!os) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

}  // namespace polsar::io
