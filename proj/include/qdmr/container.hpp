#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdmr/coding.hpp"
#include "qdmr/common.hpp"
#include "qdmr/nifti.hpp"

namespace qdmr {

enum class RecordKind : std::uint8_t { Spatial = 0, Qspace = 1, B0Diff = 2 };

enum class Predictor : std::uint8_t {
  LaplaceBeltrami = 0,
  Biharmonic = 1,
  Dti = 2,
  B0Reference = 3,  // b0diff records only
};

/// Record header for spatially coded volumes. Field widths follow the
/// container layout: min/max (4 bytes), stream sizes (8 bytes), contrast
/// parameter (4 bytes), one flags byte.
struct SpatialRecordHeader {
  std::uint16_t min_value = 0;
  std::uint16_t max_value = 0;
  std::uint32_t zero_mask_bytes = 0;
  std::uint32_t mask_values_bytes = 0;
  float lambda = 0.0f;
  std::uint8_t pde_type = 0;  // 0 = EED; 1 reserved
  bool dilation_mode = false;  // reserved, must be 0
  coding::Coder mask_coder = coding::Coder::Huffman;
  coding::Coder residual_coder = coding::Coder::Huffman;
};
constexpr std::size_t kSpatialHeaderBytes = 17;

struct QspaceRecordHeader {
  std::uint16_t min_value = 0;
  std::uint16_t max_value = 0;
  Predictor predictor = Predictor::LaplaceBeltrami;
  coding::Coder residual_coder = coding::Coder::Huffman;
  std::uint16_t original_index = 0;
};
constexpr std::size_t kQspaceHeaderBytes = 7;

void write_spatial_header(const SpatialRecordHeader& h,
                          std::vector<std::uint8_t>& out);
SpatialRecordHeader read_spatial_header(std::span<const std::uint8_t> bytes);
void write_qspace_header(const QspaceRecordHeader& h,
                         std::vector<std::uint8_t>& out);
QspaceRecordHeader read_qspace_header(std::span<const std::uint8_t> bytes);

/// One compressed volume. `payload` holds the record header followed by its
/// entropy-coded streams, opaque to the container.
struct VolumeRecord {
  RecordKind kind = RecordKind::Spatial;
  std::uint16_t coding_position = 0;
  std::vector<std::uint8_t> payload;
};

struct Container {
  bool motion = false;           // flags bit 0
  bool has_b0_reference = true;  // flags bit 1
  std::array<std::uint8_t, kNiftiHeaderSize> nifti_header{};
  std::string bval_text;
  std::string bvec_text;
  std::vector<std::string> affines;   // one per volume iff motion
  std::vector<VolumeRecord> records;  // indexed by original volume
};

constexpr std::uint8_t kContainerVersion = 1;

std::vector<std::uint8_t> serialize_container(const Container& c);
Container parse_container(std::span<const std::uint8_t> bytes);

/// Per-record sizes as laid out on disk, for stats/inspect.
struct ContainerAccounting {
  std::size_t file_size = 0;
  std::size_t fixed_and_directory = 0;
  std::size_t blob_bytes = 0;
  std::vector<std::size_t> record_bytes;  // by original volume index
  std::size_t footer_bytes = 4;
};
ContainerAccounting account_container(const Container& c);

}  // namespace qdmr
