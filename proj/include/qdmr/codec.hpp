#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qdmr/affine.hpp"
#include "qdmr/common.hpp"
#include "qdmr/container.hpp"
#include "qdmr/eed.hpp"
#include "qdmr/gradients.hpp"
#include "qdmr/nifti.hpp"
#include "qdmr/qspace.hpp"

namespace qdmr {

/// A 4D diffusion-MRI dataset: the verbatim NIfTI header, its 16-bit
/// volumes, and the gradient table files exactly as read.
struct DwiDataset {
  NiftiHeaderBlob header;
  std::vector<Volume> volumes;
  std::string bval_text;
  std::string bvec_text;
};

enum class MotionMode { Off, Builtin, Import };

struct CodecOptions {
  Predictor qspace = Predictor::LaplaceBeltrami;  // LH | BH | DTI
  OrderingStrategy order = OrderingStrategy::Furthest;
  MotionMode motion = MotionMode::Off;
  /// Required for MotionMode::Import: one transform per volume.
  std::vector<AffineTransform> imported_transforms;
  EedParams eed;
  double b0_threshold = kDefaultB0Threshold;
  /// DWIs coded spatially before DTI takes over (>= 7); DTI predictor only.
  std::optional<int> dti_split;
  /// Baseline mode: every volume through the spatial codec, no q-space.
  bool spatial_only = false;
  int threads = 0;  // 0 = all cores (or QDMR_THREADS)
};

Container compress(const DwiDataset& dataset, const CodecOptions& options);
DwiDataset decompress(const Container& container);

struct RecordStat {
  int original_index = 0;
  int coding_position = 0;
  RecordKind kind = RecordKind::Spatial;
  Predictor predictor = Predictor::LaplaceBeltrami;  // qspace/b0diff records
  int shell = -1;                                    // -1 for b=0 volumes
  std::size_t bytes = 0;
};

struct StatsReport {
  std::size_t file_size = 0;
  std::size_t overhead_bytes = 0;  // header, directory, blobs, footer
  std::vector<RecordStat> records;  // coding order
  int qspace_records = 0;
  int spatial_dwi_records = 0;
  int spatial_records = 0;
  int b0diff_records = 0;
  /// Raw input size and its DEFLATE baseline, when raw bytes are supplied.
  std::optional<std::size_t> raw_size;
  std::optional<std::size_t> raw_deflate_size;
};

StatsReport stats(const Container& container,
                  const std::vector<std::uint8_t>* raw_bytes = nullptr);

}  // namespace qdmr
