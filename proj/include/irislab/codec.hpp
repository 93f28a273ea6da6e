#pragma once

// TemplateFile binary format (all integers little-endian):
//
//   "IRTC"  u8 version=1  u16 rows  u16 cols
//   u16 identity_len  identity bytes (UTF-8)
//   u16 sample_len    sample_id bytes (UTF-8)
//   code bits, then mask bits: row-major, LSB-first, each row padded to a byte
//
// Pad bits are written as zero and ignored on read.

#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "irislab/errors.hpp"
#include "irislab/template.hpp"

namespace irislab {

inline constexpr std::array<char, 4> kTemplateMagic{'I', 'R', 'T', 'C'};
inline constexpr std::uint8_t kTemplateVersion = 1;

namespace detail {

inline std::size_t row_bytes(std::size_t cols) { return (cols + 7) / 8; }

inline std::uint8_t byte_at(const BitMatrix& m, std::size_t r, std::size_t b) {
  const auto words = m.row(r);
  return static_cast<std::uint8_t>(words[b / 8] >> (8 * (b % 8)));
}

inline void put_byte(BitMatrix& m, std::size_t r, std::size_t b, std::uint8_t value) {
  auto words = m.row(r);
  const std::size_t shift = 8 * (b % 8);
  words[b / 8] = (words[b / 8] & ~(BitMatrix::Word{0xFF} << shift)) |
                 (static_cast<BitMatrix::Word>(value) << shift);
}

inline std::vector<std::uint8_t> pack_bits(const BitMatrix& m) {
  const std::size_t per_row = row_bytes(m.cols());
  std::vector<std::uint8_t> out;
  out.reserve(per_row * m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t b = 0; b < per_row; ++b) out.push_back(byte_at(m, r, b));
  return out;
}

inline BitMatrix unpack_bits(std::span<const std::uint8_t> bytes, std::size_t rows, std::size_t cols) {
  BitMatrix m(rows, cols);
  const std::size_t per_row = row_bytes(cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t b = 0; b < per_row; ++b) put_byte(m, r, b, bytes[r * per_row + b]);
  m.clear_padding();
  return m;
}

inline void put_u16(std::string& out, std::size_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void read(void* dst, std::size_t n, const char* field) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(field, "truncated payload");
  }

  std::uint16_t u16(const char* field) {
    std::array<std::uint8_t, 2> b{};
    read(b.data(), 2, field);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::string label(const char* field) {
    const std::uint16_t len = u16(field);
    std::string s(len, '\0');
    if (len > 0) read(s.data(), len, field);
    return s;
  }

 private:
  std::istream& in_;
};

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline std::vector<std::uint8_t> decode_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw ParseError("hex string has odd length");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ParseError("non-hex character in '" + std::string(hex) + "'");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

}  // namespace detail

// Returns the number of bytes written.
inline std::size_t write_template(const IrisTemplate& t, std::ostream& sink) {
  t.validate();
  constexpr auto kMax = std::numeric_limits<std::uint16_t>::max();
  require(t.rows() <= kMax && t.cols() <= kMax, "template geometry exceeds 16-bit header fields");
  require(t.identity.size() <= kMax && t.sample_id.size() <= kMax, "label exceeds 65535 bytes");

  std::string out(kTemplateMagic.begin(), kTemplateMagic.end());
  out.push_back(static_cast<char>(kTemplateVersion));
  detail::put_u16(out, t.rows());
  detail::put_u16(out, t.cols());
  detail::put_u16(out, t.identity.size());
  out += t.identity;
  detail::put_u16(out, t.sample_id.size());
  out += t.sample_id;
  for (const BitMatrix* m : {&t.code, &t.mask}) {
    const auto bytes = detail::pack_bits(*m);
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }

  sink.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!sink) throw IoError("template write failed");
  return out.size();
}

inline IrisTemplate read_template(std::istream& source) {
  detail::ByteReader in(source);

  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size(), "magic");
  if (magic != kTemplateMagic) throw FormatError("magic", "bad magic");

  std::uint8_t version = 0;
  in.read(&version, 1, "version");
  if (version != kTemplateVersion)
    throw FormatError("version", "unsupported version " + std::to_string(version));

  const std::size_t rows = in.u16("rows");
  const std::size_t cols = in.u16("cols");
  if (rows == 0) throw FormatError("rows", "rows must be positive");
  if (cols == 0) throw FormatError("cols", "cols must be positive");

  IrisTemplate t;
  t.identity = in.label("identity");
  t.sample_id = in.label("sample_id");

  std::vector<std::uint8_t> payload(detail::row_bytes(cols) * rows);
  in.read(payload.data(), payload.size(), "code");
  t.code = detail::unpack_bits(payload, rows, cols);
  in.read(payload.data(), payload.size(), "mask");
  t.mask = detail::unpack_bits(payload, rows, cols);
  return t;
}

inline void save_template(const std::filesystem::path& path, const IrisTemplate& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_template(t, out);
}

inline IrisTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_template(in);
}

// Uppercase hex of a bit matrix using the TemplateFile row packing.
inline std::string to_hex(const BitMatrix& m) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  for (std::uint8_t b : detail::pack_bits(m)) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

// Parses one hex record: code hex then mask hex, whitespace separated. Each
// string must hold at least rows * ceil(cols/8) bytes; extra bytes are ignored.
inline IrisTemplate import_hex(std::string_view text, std::size_t rows, std::size_t cols,
                               std::string identity, std::string sample_id = {}) {
  require(rows > 0 && cols > 0, "import_hex: geometry must be non-empty");
  std::istringstream in{std::string(text)};
  std::string code_hex;
  std::string mask_hex;
  if (!(in >> code_hex >> mask_hex)) throw ParseError("hex record needs a code and a mask string");

  const std::size_t needed = detail::row_bytes(cols) * rows;
  const auto code = detail::decode_hex(code_hex);
  const auto mask = detail::decode_hex(mask_hex);
  if (code.size() < needed || mask.size() < needed)
    throw ParseError("hex record too short: need " + std::to_string(needed) + " bytes per matrix");

  return IrisTemplate(detail::unpack_bits(code, rows, cols), detail::unpack_bits(mask, rows, cols),
                      std::move(identity), std::move(sample_id));
}

}  // namespace irislab
