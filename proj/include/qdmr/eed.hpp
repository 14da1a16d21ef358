#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qdmr/common.hpp"

namespace qdmr {

/// Edge-enhancing diffusion parameters. Only lambda travels in the record
/// header; the remaining fields are fixed protocol constants that encoder and
/// decoder share, so changing them breaks replay of existing containers.
struct EedParams {
  float lambda = 8.0f;  // contrast, in intensity units
  double sigma = 1.0;   // presmoothing scale, voxels
  double tau = 0.1;     // explicit time step
  double tol = 1e-4;    // stop threshold, fraction of value range
  int max_iters = 5000;
  int tensor_update_interval = 50;

  bool replayable_defaults() const {
    return sigma == 1.0 && tau == 0.1 && tol == 1e-4 && max_iters == 5000 &&
           tensor_update_interval == 50;
  }
};

/// Known-voxel mask with the values pinned there.
struct InpaintingMask {
  Dims3 dims;
  std::vector<std::uint8_t> member;        // 1 per known voxel
  std::vector<std::uint16_t> known_values; // dense, read at member voxels
};

/// Seed voxels (4i, 4j, 4k) of the sparse regular grid.
std::vector<std::uint8_t> initial_mask(Dims3 dims);
std::size_t initial_mask_count(Dims3 dims);

/// Diffusion tensor with diffusivity 1/sqrt(1 + |g|^2/lambda^2) along the
/// (smoothed) gradient and 1 in the perpendicular plane. Returned as unique
/// components (xx, yy, zz, xy, xz, yz).
std::array<double, 6> eed_tensor(const std::array<double, 3>& smoothed_gradient,
                                 double lambda);

/// Explicit-scheme EED inpainting state. Supports warm restarts so the
/// iterative codec can grow the mask without resolving from scratch; the
/// decoder replays the identical sequence of states.
class EedInpainter {
public:
  EedInpainter(Dims3 dims, const EedParams& params, double range_min,
               double range_max, int threads);

  /// Pins a voxel to an exact value (Dirichlet) from now on.
  void set_known(std::size_t index, std::uint16_t value);

  /// Initializes all free voxels to the mean of the known values.
  void init_free_from_known_mean();

  /// Runs explicit updates until max |update| <= tol * (max - min), or the
  /// iteration cap. Non-convergence is not an error.
  void solve();

  const std::vector<double>& values() const { return u_; }
  const std::vector<std::uint8_t>& known() const { return known_; }
  Dims3 dims() const { return dims_; }

private:
  void update_tensors();

  Dims3 dims_;
  EedParams params_;
  double range_ = 0.0;
  int threads_ = 1;
  std::vector<double> u_;
  std::vector<double> next_;
  std::vector<std::uint8_t> known_;
  std::vector<std::array<double, 6>> tensors_;
  std::vector<double> smoothed_;
  std::vector<double> scratch_;
};

/// The discrete div(D grad u) at one voxel: half-point face fluxes (zero
/// across the domain boundary) and central-difference mixed terms over the
/// 18-neighborhood. Exposed so the stencil can be checked against analytic
/// fields.
double anisotropic_divergence(const std::vector<double>& u,
                              const std::vector<std::array<double, 6>>& tensors,
                              Dims3 dims, int x, int y, int z);

/// One-shot inpainting: mask voxels keep their exact values, free voxels get
/// the converged solution of div(D grad u) = 0.
std::vector<double> inpaint_eed(const InpaintingMask& mask,
                                const EedParams& params, int threads = 1);

}  // namespace qdmr
