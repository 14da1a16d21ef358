#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qdmr/common.hpp"

namespace qdmr {

constexpr std::size_t kNiftiHeaderSize = 348;

/// The verbatim 348-byte NIfTI-1 header plus the parsed fields the codec
/// needs. The raw bytes are what the container stores and what write_nifti
/// emits, so the round trip never re-serializes header fields.
struct NiftiHeaderBlob {
  std::array<std::uint8_t, kNiftiHeaderSize> raw{};
  Dims3 dims;
  int nvol = 0;
  int datatype = 0;
  int bitpix = 0;
  bool big_endian = false;
  std::array<float, 3> voxel_size{1.0f, 1.0f, 1.0f};
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
};

struct NiftiFile {
  NiftiHeaderBlob header;
  std::vector<Volume> volumes;
};

/// Parses a single-file NIfTI-1 image (optionally gzip-wrapped). Accepts
/// integer datatypes up to 16 bits, and float datatypes only when every
/// scaled value is an exact integer in [0, 65535]; anything that cannot be
/// reproduced byte-exactly on write is rejected.
NiftiFile read_nifti(std::span<const std::uint8_t> bytes);

/// Parses only the 348 header bytes (used when decoding a container).
NiftiHeaderBlob parse_nifti_header(
    std::span<const std::uint8_t, kNiftiHeaderSize> raw);

/// Emits the stored raw header verbatim, the 4-byte zero extender, and the
/// payload re-serialized in the source datatype and byte order.
std::vector<std::uint8_t> write_nifti(const NiftiHeaderBlob& header,
                                      const std::vector<Volume>& volumes);

/// Builds a minimal little-endian uint16 header for synthetic datasets.
NiftiHeaderBlob make_nifti_header(Dims3 dims, int nvol);

}  // namespace qdmr
