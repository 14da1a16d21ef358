#pragma once

#include <array>
#include <vector>

#include "qdmr/affine.hpp"
#include "qdmr/common.hpp"

namespace qdmr {

struct RegistrationParams {
  int levels = 3;
  int dof = 12;  // 6 = rigid, 12 = full affine
  int max_evals_per_level = 2000;
  double convergence = 1e-9;  // relative cost improvement per cycle
};

/// Deterministic multiresolution MSE registration (coordinate descent over a
/// fixed parameter order). Returns a voxel-space transform mapping moving
/// coordinates to reference coordinates; falls back to identity when no
/// parameter move improves on it.
AffineTransform register_affine(const Volume& moving, const Volume& reference,
                                const RegistrationParams& params = {});

/// inv(t_p_to_b0) * t_x_to_b0: maps X's voxel coordinates into P's space.
AffineTransform compose_to_target(const AffineTransform& t_x_to_b0,
                                  const AffineTransform& t_p_to_b0);

/// Pull-back resampling: `target_to_source` maps output voxel coordinates to
/// input coordinates; trilinear interpolation with nearest-neighbor
/// extrapolation (source coordinates clamp to the domain). Real-valued
/// output; the caller quantizes.
std::vector<double> resample(const Volume& source,
                             const AffineTransform& target_to_source,
                             int threads = 1);

/// Rotational part via polar decomposition R = L (L^T L)^(-1/2); returns the
/// normalized rotated gradient. Reflections are an error.
std::array<double, 3> reorient_gradient(const std::array<double, 3>& g,
                                        const AffineTransform& transform);

}  // namespace qdmr
