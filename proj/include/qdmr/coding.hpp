#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qdmr/common.hpp"

namespace qdmr::coding {

// ---------------------------------------------------------------------------
// Modular residuals
// ---------------------------------------------------------------------------

/// r = (original - predicted) mod 2^16, elementwise.
std::vector<std::uint16_t> residuals_encode(const Volume& original,
                                            const Volume& predicted);

/// original = (predicted + r) mod 2^16. Exact inverse of residuals_encode.
Volume residuals_apply(const Volume& predicted,
                       std::span<const std::uint16_t> residuals);

// ---------------------------------------------------------------------------
// Entropy coding
// ---------------------------------------------------------------------------

enum class Coder : std::uint8_t { Huffman = 0, Deflate = 1 };

/// One entropy-coded symbol stream. `bytes` is self-contained given the coder
/// tag and the symbol count, both of which live in the record header:
///  - Huffman: serialized canonical table followed by MSB-first packed bits.
///  - Deflate: raw RFC 1951 stream of the symbols serialized little-endian.
struct EncodedStream {
  Coder coder = Coder::Huffman;
  std::uint32_t symbol_count = 0;
  std::vector<std::uint8_t> bytes;
};

/// Canonical Huffman over the observed 16-bit symbols. Code lengths are
/// capped at 15 (16 when more than 2^15 distinct symbols make 15 infeasible).
/// Table layout: u16 distinct count (0 encodes 65536), then per symbol in
/// ascending order: u16 symbol, u8 length.
EncodedStream huffman_encode(std::span<const std::uint16_t> symbols);
std::vector<std::uint16_t> huffman_decode(std::span<const std::uint8_t> bytes,
                                          std::size_t symbol_count);

/// Raw DEFLATE (RFC 1951) over arbitrary bytes.
std::vector<std::uint8_t> deflate_bytes(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> data,
                                        std::size_t expected_size);

EncodedStream deflate_encode(std::span<const std::uint16_t> symbols);
std::vector<std::uint16_t> deflate_decode(std::span<const std::uint8_t> bytes,
                                          std::size_t symbol_count);

/// Encodes with both coders and returns the smaller stream; ties go to
/// Huffman.
EncodedStream choose_stream(std::span<const std::uint16_t> symbols);

std::vector<std::uint16_t> decode_stream(Coder coder,
                                         std::span<const std::uint8_t> bytes,
                                         std::size_t symbol_count);

/// gzip (RFC 1952) decompression; used for .nii.gz inputs.
std::vector<std::uint8_t> gunzip_bytes(std::span<const std::uint8_t> data);
bool looks_gzipped(std::span<const std::uint8_t> data);

}  // namespace qdmr::coding
