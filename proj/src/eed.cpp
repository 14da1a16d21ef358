#include "qdmr/eed.hpp"

#include <algorithm>
#include <cmath>

namespace qdmr {

std::vector<std::uint8_t> initial_mask(Dims3 dims) {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
    throw Error("initial_mask: bad dims");
  }
  std::vector<std::uint8_t> member(dims.voxel_count(), 0);
  for (int z = 0; z < dims.nz; z += 4) {
    for (int y = 0; y < dims.ny; y += 4) {
      for (int x = 0; x < dims.nx; x += 4) {
        member[voxel_index(dims, x, y, z)] = 1;
      }
    }
  }
  return member;
}

std::size_t initial_mask_count(Dims3 dims) {
  auto per_axis = [](int n) { return static_cast<std::size_t>((n - 1) / 4) + 1; };
  return per_axis(dims.nx) * per_axis(dims.ny) * per_axis(dims.nz);
}

std::array<double, 6> eed_tensor(const std::array<double, 3>& g,
                                 double lambda) {
  double s2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
  if (s2 == 0.0) {
    return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0};
  }
  // D = I + (g(s^2) - 1) n n^T with Charbonnier g(s^2) = 1/sqrt(1 + s^2/l^2).
  double diff = 1.0 / std::sqrt(1.0 + s2 / (lambda * lambda));
  double scale = (diff - 1.0) / s2;
  return {1.0 + scale * g[0] * g[0], 1.0 + scale * g[1] * g[1],
          1.0 + scale * g[2] * g[2], scale * g[0] * g[1],
          scale * g[0] * g[2],       scale * g[1] * g[2]};
}

namespace {

// Separable Gaussian, radius 3*sigma, renormalized where the stencil leaves
// the domain.
void gaussian_smooth(const std::vector<double>& in, std::vector<double>& out,
                     std::vector<double>& scratch, Dims3 dims, double sigma,
                     int threads) {
  if (sigma <= 0.0) {
    out = in;
    return;
  }
  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] =
        std::exp(-0.5 * (k * k) / (sigma * sigma));
  }

  const int n[3] = {dims.nx, dims.ny, dims.nz};
  const std::ptrdiff_t stride[3] = {
      1, dims.nx, static_cast<std::ptrdiff_t>(dims.nx) * dims.ny};

  out.resize(in.size());
  scratch.resize(in.size());
  const std::vector<double>* src = &in;
  std::vector<double>* dst = &out;
  for (int axis = 0; axis < 3; ++axis) {
    const std::vector<double>& s = *src;
    std::vector<double>& d = *dst;
    parallel_for(in.size(), threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        int coord[3];
        std::size_t rem = i;
        coord[0] = static_cast<int>(rem % static_cast<std::size_t>(dims.nx));
        rem /= static_cast<std::size_t>(dims.nx);
        coord[1] = static_cast<int>(rem % static_cast<std::size_t>(dims.ny));
        coord[2] = static_cast<int>(rem / static_cast<std::size_t>(dims.ny));
        double sum = 0.0, wsum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int c = coord[axis] + k;
          if (c < 0 || c >= n[axis]) continue;
          double w = kernel[static_cast<std::size_t>(k + radius)];
          sum += w * s[i + static_cast<std::size_t>(
                               static_cast<std::ptrdiff_t>(k) * stride[axis])];
          wsum += w;
        }
        d[i] = sum / wsum;
      }
    });
    if (axis == 0) {
      src = &out;
      dst = &scratch;
    } else if (axis == 1) {
      src = &scratch;
      dst = &out;
    }
  }
}

}  // namespace

EedInpainter::EedInpainter(Dims3 dims, const EedParams& params,
                           double range_min, double range_max, int threads)
    : dims_(dims),
      params_(params),
      range_(range_max - range_min),
      threads_(threads),
      u_(dims.voxel_count(), 0.0),
      next_(dims.voxel_count(), 0.0),
      known_(dims.voxel_count(), 0),
      tensors_(dims.voxel_count()) {
  if (params.lambda <= 0.0f || params.sigma < 0.0 || params.tau <= 0.0 ||
      params.tau > 1.0 / 6.0 || params.tol <= 0.0 || params.max_iters < 1 ||
      params.tensor_update_interval < 1) {
    throw Error("eed: bad parameters");
  }
}

void EedInpainter::set_known(std::size_t index, std::uint16_t value) {
  known_[index] = 1;
  u_[index] = static_cast<double>(value);
}

void EedInpainter::init_free_from_known_mean() {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < u_.size(); ++i) {
    if (known_[i]) {
      sum += u_[i];
      ++count;
    }
  }
  if (count == 0) throw Error("eed: empty mask");
  double mean = sum / static_cast<double>(count);
  for (std::size_t i = 0; i < u_.size(); ++i) {
    if (!known_[i]) u_[i] = mean;
  }
}

void EedInpainter::update_tensors() {
  gaussian_smooth(u_, smoothed_, scratch_, dims_, params_.sigma, threads_);
  const std::vector<double>& s = params_.sigma > 0.0 ? smoothed_ : u_;
  double lambda = static_cast<double>(params_.lambda);
  parallel_for(u_.size(), threads_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      int x = static_cast<int>(i % static_cast<std::size_t>(dims_.nx));
      std::size_t rem = i / static_cast<std::size_t>(dims_.nx);
      int y = static_cast<int>(rem % static_cast<std::size_t>(dims_.ny));
      int z = static_cast<int>(rem / static_cast<std::size_t>(dims_.ny));
      auto at = [&](int xx, int yy, int zz) {
        xx = std::clamp(xx, 0, dims_.nx - 1);
        yy = std::clamp(yy, 0, dims_.ny - 1);
        zz = std::clamp(zz, 0, dims_.nz - 1);
        return s[voxel_index(dims_, xx, yy, zz)];
      };
      std::array<double, 3> grad = {
          (at(x + 1, y, z) - at(x - 1, y, z)) * 0.5,
          (at(x, y + 1, z) - at(x, y - 1, z)) * 0.5,
          (at(x, y, z + 1) - at(x, y, z - 1)) * 0.5};
      tensors_[i] = eed_tensor(grad, lambda);
    }
  });
}

double anisotropic_divergence(const std::vector<double>& u,
                              const std::vector<std::array<double, 6>>& tensors,
                              Dims3 dims, int x, int y, int z) {
  auto uat = [&](int xx, int yy, int zz) {
    xx = std::clamp(xx, 0, dims.nx - 1);
    yy = std::clamp(yy, 0, dims.ny - 1);
    zz = std::clamp(zz, 0, dims.nz - 1);
    return u[voxel_index(dims, xx, yy, zz)];
  };
  auto tat = [&](int xx, int yy, int zz) -> const std::array<double, 6>& {
    xx = std::clamp(xx, 0, dims.nx - 1);
    yy = std::clamp(yy, 0, dims.ny - 1);
    zz = std::clamp(zz, 0, dims.nz - 1);
    return tensors[voxel_index(dims, xx, yy, zz)];
  };

  const std::array<double, 6>& tc = tat(x, y, z);
  double uc = uat(x, y, z);
  double div = 0.0;

  // Face terms d/dx(a u_x), d/dy(d u_y), d/dz(f u_z) with half-point
  // diffusivities; flux across the domain boundary is zero.
  if (x + 1 < dims.nx) {
    div += 0.5 * (tc[0] + tat(x + 1, y, z)[0]) * (uat(x + 1, y, z) - uc);
  }
  if (x > 0) {
    div -= 0.5 * (tc[0] + tat(x - 1, y, z)[0]) * (uc - uat(x - 1, y, z));
  }
  if (y + 1 < dims.ny) {
    div += 0.5 * (tc[1] + tat(x, y + 1, z)[1]) * (uat(x, y + 1, z) - uc);
  }
  if (y > 0) {
    div -= 0.5 * (tc[1] + tat(x, y - 1, z)[1]) * (uc - uat(x, y - 1, z));
  }
  if (z + 1 < dims.nz) {
    div += 0.5 * (tc[2] + tat(x, y, z + 1)[2]) * (uat(x, y, z + 1) - uc);
  }
  if (z > 0) {
    div -= 0.5 * (tc[2] + tat(x, y, z - 1)[2]) * (uc - uat(x, y, z - 1));
  }

  // Mixed terms over the 18-neighborhood: central x central.
  div += 0.25 * (tat(x + 1, y, z)[3] *
                     (uat(x + 1, y + 1, z) - uat(x + 1, y - 1, z)) -
                 tat(x - 1, y, z)[3] *
                     (uat(x - 1, y + 1, z) - uat(x - 1, y - 1, z)));
  div += 0.25 * (tat(x, y + 1, z)[3] *
                     (uat(x + 1, y + 1, z) - uat(x - 1, y + 1, z)) -
                 tat(x, y - 1, z)[3] *
                     (uat(x + 1, y - 1, z) - uat(x - 1, y - 1, z)));
  div += 0.25 * (tat(x + 1, y, z)[4] *
                     (uat(x + 1, y, z + 1) - uat(x + 1, y, z - 1)) -
                 tat(x - 1, y, z)[4] *
                     (uat(x - 1, y, z + 1) - uat(x - 1, y, z - 1)));
  div += 0.25 * (tat(x, y, z + 1)[4] *
                     (uat(x + 1, y, z + 1) - uat(x - 1, y, z + 1)) -
                 tat(x, y, z - 1)[4] *
                     (uat(x + 1, y, z - 1) - uat(x - 1, y, z - 1)));
  div += 0.25 * (tat(x, y + 1, z)[5] *
                     (uat(x, y + 1, z + 1) - uat(x, y + 1, z - 1)) -
                 tat(x, y - 1, z)[5] *
                     (uat(x, y - 1, z + 1) - uat(x, y - 1, z - 1)));
  div += 0.25 * (tat(x, y, z + 1)[5] *
                     (uat(x, y + 1, z + 1) - uat(x, y - 1, z + 1)) -
                 tat(x, y, z - 1)[5] *
                     (uat(x, y + 1, z - 1) - uat(x, y - 1, z - 1)));
  return div;
}

void EedInpainter::solve() {
  double threshold = params_.tol * range_;
  std::size_t n = u_.size();
  std::size_t workers = static_cast<std::size_t>(std::max(1, threads_));
  std::vector<double> chunk_max(workers, 0.0);

  for (int iter = 0; iter < params_.max_iters; ++iter) {
    // Lagged diffusivity: tensors recomputed every few steps only.
    if (iter % params_.tensor_update_interval == 0) update_tensors();

    std::fill(chunk_max.begin(), chunk_max.end(), 0.0);
    const std::vector<double>& u = u_;
    std::vector<double>& next = next_;
    parallel_for_indexed(n, threads_, [&](std::size_t worker,
                                          std::size_t begin, std::size_t end) {
      double local_max = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        if (known_[i]) {
          next[i] = u[i];
          continue;
        }
        int x = static_cast<int>(i % static_cast<std::size_t>(dims_.nx));
        std::size_t rem = i / static_cast<std::size_t>(dims_.nx);
        int y = static_cast<int>(rem % static_cast<std::size_t>(dims_.ny));
        int z = static_cast<int>(rem / static_cast<std::size_t>(dims_.ny));

        double updated =
            u[i] + params_.tau * anisotropic_divergence(u, tensors_, dims_,
                                                        x, y, z);
        next[i] = updated;
        double change = std::abs(updated - u[i]);
        if (change > local_max) local_max = change;
      }
      chunk_max[worker] = local_max;
    });
    std::swap(u_, next_);
    double max_change = 0.0;
    for (double c : chunk_max) max_change = std::max(max_change, c);
    if (max_change <= threshold) break;
  }
}

std::vector<double> inpaint_eed(const InpaintingMask& mask,
                                const EedParams& params, int threads) {
  if (mask.member.size() != mask.dims.voxel_count() ||
      mask.known_values.size() != mask.dims.voxel_count()) {
    throw Error("inpaint_eed: mask size mismatch");
  }
  double lo = 65535.0, hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < mask.member.size(); ++i) {
    if (mask.member[i]) {
      any = true;
      lo = std::min(lo, static_cast<double>(mask.known_values[i]));
      hi = std::max(hi, static_cast<double>(mask.known_values[i]));
    }
  }
  if (!any) throw Error("inpaint_eed: empty mask");
  EedInpainter solver(mask.dims, params, lo, hi, threads);
  for (std::size_t i = 0; i < mask.member.size(); ++i) {
    if (mask.member[i]) solver.set_known(i, mask.known_values[i]);
  }
  solver.init_free_from_known_mean();
  solver.solve();
  return solver.values();
}

}  // namespace qdmr
