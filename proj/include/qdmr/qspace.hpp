#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qdmr/common.hpp"
#include "qdmr/fem.hpp"
#include "qdmr/sphere_mesh.hpp"

namespace qdmr {

constexpr std::int64_t kWeightScale = 1 << 16;  // fixed point, 2^-16

/// Prediction weights mapping known channel values to unknown-channel
/// predictions. Fixed-point rows sum to exactly 2^16 so constant inputs
/// predict exactly and the integer dot product replays bit-identically.
struct WeightMatrix {
  QspacePde kind = QspacePde::LaplaceBeltrami;
  int known_count = 0;
  std::vector<int> target_channels;
  std::vector<std::vector<double>> real_rows;        // per target
  std::vector<std::vector<std::int32_t>> fixed_rows; // per target
};

/// Solves one indicator Dirichlet problem per known channel (both antipodal
/// vertices set to 1) and reads each target channel's weight as the mean of
/// its two antipodal vertex values.
WeightMatrix compute_weights(const std::vector<std::array<double, 3>>& directions,
                             const std::vector<int>& known_channels,
                             const std::vector<int>& target_channels,
                             QspacePde kind);

/// Integer prediction: per voxel accumulate sum(w_i * v_i) in 64-bit at scale
/// 2^-16, round half away from zero, clamp. Independent of thread count.
Volume predict_volume(const std::vector<const Volume*>& known_volumes,
                      std::span<const std::int32_t> weight_row,
                      std::uint16_t clamp_lo = 0,
                      std::uint16_t clamp_hi = 0xFFFF, int threads = 1);

enum class OrderingStrategy { Furthest, Closest, Original };

/// Greedy coding order over gradient directions, starting at start_index.
/// Furthest maximizes (closest minimizes) the minimum antipodal angular
/// distance to the already selected set; ties break to the lowest index.
std::vector<int> order_volumes(const std::vector<std::array<double, 3>>& directions,
                               OrderingStrategy strategy, int start_index);

}  // namespace qdmr
