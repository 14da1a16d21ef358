#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qdmr/common.hpp"
#include "qdmr/eed.hpp"

namespace qdmr {

/// Losslessly codes one volume: a sparse-grid seed mask, EED inpainting, and
/// iterative modular-residual coding of face-connected mask neighbors.
/// The returned payload is a complete record (header plus streams).
std::vector<std::uint8_t> encode_volume_spatial(const Volume& volume,
                                                const EedParams& params,
                                                int threads = 1);

/// Mirrors the encoder exactly; dims come from the caller (NIfTI header).
Volume decode_volume_spatial(std::span<const std::uint8_t> payload, Dims3 dims,
                             int threads = 1);

}  // namespace qdmr
