#pragma once

#include <array>
#include <string>

#include "qdmr/common.hpp"

namespace qdmr {

/// 4x4 voxel-space affine; maps homogeneous voxel coordinates of the moving
/// volume to voxel coordinates of the reference. Last row is (0,0,0,1).
struct AffineTransform {
  std::array<std::array<double, 4>, 4> m{};

  static AffineTransform identity() {
    AffineTransform t;
    for (int i = 0; i < 4; ++i) t.m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    return t;
  }

  std::array<double, 3> apply(const std::array<double, 3>& p) const {
    std::array<double, 3> out{};
    for (std::size_t r = 0; r < 3; ++r) {
      out[r] = m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2] + m[r][3];
    }
    return out;
  }

  bool is_identity(double tol = 0.0) const {
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        double want = r == c ? 1.0 : 0.0;
        if (std::abs(m[r][c] - want) > tol) return false;
      }
    }
    return true;
  }
};

AffineTransform multiply(const AffineTransform& a, const AffineTransform& b);
double linear_determinant(const AffineTransform& t);
AffineTransform invert(const AffineTransform& t);

/// FLIRT-style ASCII: 4 lines of 4 numbers. Values are written with 17
/// significant digits so the round trip is numerically exact.
AffineTransform read_affine_ascii(const std::string& text);
std::string write_affine_ascii(const AffineTransform& t);

}  // namespace qdmr
