#pragma once

#include <array>
#include <string>
#include <vector>

#include "qdmr/common.hpp"

namespace qdmr {

constexpr double kDefaultB0Threshold = 50.0;  // s/mm^2
constexpr double kShellRelativeTolerance = 0.05;

/// Gradient table with the b=0 / shell partition. The original ASCII bytes
/// are retained verbatim for container storage.
struct GradientTable {
  std::vector<double> bvals;
  std::vector<std::array<double, 3>> bvecs;  // unit length, or zero for b=0
  std::vector<int> b0_group;                 // volume indices, bval <= threshold
  std::vector<std::vector<int>> shells;      // per shell, ascending mean b
  std::vector<double> shell_bvals;           // mean bval per shell
  std::vector<int> shell_of_volume;          // -1 for b=0 group
  std::string bval_text;
  std::string bvec_text;
};

std::vector<double> parse_bvals(const std::string& text);
std::vector<std::array<double, 3>> parse_bvecs(const std::string& text);

/// Groups the given volume indices into shells by relative b-value tolerance.
/// Shells come out in ascending mean-b order; indices keep acquisition order.
std::vector<std::vector<int>> cluster_shells(const std::vector<double>& bvals,
                                             const std::vector<int>& indices,
                                             double relative_tolerance);

GradientTable read_gradients(const std::string& bval_text,
                             const std::string& bvec_text,
                             double b0_threshold = kDefaultB0Threshold,
                             double shell_tolerance = kShellRelativeTolerance);

std::string render_bvals(const std::vector<double>& bvals);
std::string render_bvecs(const std::vector<std::array<double, 3>>& bvecs);

}  // namespace qdmr
