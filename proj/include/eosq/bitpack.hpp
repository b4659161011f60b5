#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "eosq/common.hpp"

namespace eosq::bitpack {

// Little-endian bit stream: bit i of the stream is bit (i % 8) of byte i / 8.

inline void append_bits(std::vector<std::uint8_t>& buf, std::size_t& bit_pos,
                        std::uint32_t value, int bits) {
  for (int i = 0; i < bits; ++i) {
    if (bit_pos % 8 == 0) buf.push_back(0);
    if ((value >> i) & 1u)
      buf[bit_pos / 8] |= static_cast<std::uint8_t>(1u << (bit_pos % 8));
    ++bit_pos;
  }
}

inline std::uint32_t read_bits(const std::uint8_t* data, std::size_t& bit_pos,
                               int bits) {
  std::uint32_t value = 0;
  for (int i = 0; i < bits; ++i) {
    if ((data[bit_pos / 8] >> (bit_pos % 8)) & 1u) value |= (1u << i);
    ++bit_pos;
  }
  return value;
}

inline std::size_t packed_row_bytes(std::size_t cols, int bits) {
  return (cols * static_cast<std::size_t>(bits) + 7) / 8;
}

// Packs rows of codes, each row padded to a byte boundary.
inline std::vector<std::uint8_t> pack_rows(const std::uint8_t* codes,
                                           std::size_t rows, std::size_t cols,
                                           int bits) {
  std::vector<std::uint8_t> out;
  out.reserve(rows * packed_row_bytes(cols, bits));
  std::size_t bit_pos = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c)
      append_bits(out, bit_pos, codes[r * cols + c], bits);
    bit_pos = out.size() * 8;  // byte-align between rows
  }
  return out;
}

inline void unpack_rows(const std::uint8_t* bytes, std::size_t rows,
                        std::size_t cols, int bits, std::uint8_t* out) {
  const std::size_t stride = packed_row_bytes(cols, bits);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t bit_pos = 0;
    const std::uint8_t* row = bytes + r * stride;
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] =
          static_cast<std::uint8_t>(read_bits(row, bit_pos, bits));
  }
}

// Sign bits packed 8 per byte, one row padded to a byte boundary.
inline std::vector<std::uint8_t> pack_bitmap(const std::uint8_t* flags,
                                             std::size_t count) {
  std::vector<std::uint8_t> out((count + 7) / 8, 0);
  for (std::size_t i = 0; i < count; ++i)
    if (flags[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

inline void unpack_bitmap(const std::uint8_t* bytes, std::size_t count,
                          std::uint8_t* out) {
  for (std::size_t i = 0; i < count; ++i)
    out[i] = (bytes[i / 8] >> (i % 8)) & 1u;
}

}  // namespace eosq::bitpack
