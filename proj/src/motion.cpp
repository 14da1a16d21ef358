#include "qdmr/motion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace qdmr {

AffineTransform compose_to_target(const AffineTransform& t_x_to_b0,
                                  const AffineTransform& t_p_to_b0) {
  return multiply(invert(t_p_to_b0), t_x_to_b0);
}

namespace {

double sample_trilinear(const Volume& v, double x, double y, double z) {
  // Nearest-neighbor extrapolation: clamp into the source domain.
  x = std::clamp(x, 0.0, static_cast<double>(v.dims.nx - 1));
  y = std::clamp(y, 0.0, static_cast<double>(v.dims.ny - 1));
  z = std::clamp(z, 0.0, static_cast<double>(v.dims.nz - 1));
  int x0 = static_cast<int>(x), y0 = static_cast<int>(y), z0 = static_cast<int>(z);
  int x1 = std::min(x0 + 1, v.dims.nx - 1);
  int y1 = std::min(y0 + 1, v.dims.ny - 1);
  int z1 = std::min(z0 + 1, v.dims.nz - 1);
  double fx = x - x0, fy = y - y0, fz = z - z0;
  double gx = 1.0 - fx, gy = 1.0 - fy, gz = 1.0 - fz;
  // Fixed expression tree: eight corner terms in binary order.
  return gx * gy * gz * v.at(x0, y0, z0) + fx * gy * gz * v.at(x1, y0, z0) +
         gx * fy * gz * v.at(x0, y1, z0) + fx * fy * gz * v.at(x1, y1, z0) +
         gx * gy * fz * v.at(x0, y0, z1) + fx * gy * fz * v.at(x1, y0, z1) +
         gx * fy * fz * v.at(x0, y1, z1) + fx * fy * fz * v.at(x1, y1, z1);
}

}  // namespace

std::vector<double> resample(const Volume& source,
                             const AffineTransform& target_to_source,
                             int threads) {
  if (std::abs(linear_determinant(target_to_source)) <= 1e-9) {
    throw Error("resample: singular transform");
  }
  Dims3 dims = source.dims;
  std::vector<double> out(dims.voxel_count());
  parallel_for(dims.voxel_count(), threads,
               [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      int x = static_cast<int>(i % static_cast<std::size_t>(dims.nx));
      std::size_t rem = i / static_cast<std::size_t>(dims.nx);
      int y = static_cast<int>(rem % static_cast<std::size_t>(dims.ny));
      int z = static_cast<int>(rem / static_cast<std::size_t>(dims.ny));
      std::array<double, 3> p = target_to_source.apply(
          {static_cast<double>(x), static_cast<double>(y),
           static_cast<double>(z)});
      out[i] = sample_trilinear(source, p[0], p[1], p[2]);
    }
  });
  return out;
}

std::array<double, 3> reorient_gradient(const std::array<double, 3>& g,
                                        const AffineTransform& t) {
  Eigen::Matrix3d l;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      l(r, c) = t.m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  if (std::abs(l.determinant()) <= 1e-9) {
    throw Error("reorient: singular linear part");
  }
  // R = L (L^T L)^(-1/2) via the eigendecomposition of the symmetric L^T L.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(l.transpose() * l);
  if (eig.info() != Eigen::Success) throw Error("reorient: eigensolve failed");
  Eigen::Vector3d inv_sqrt = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  Eigen::Matrix3d r = l * eig.eigenvectors() * inv_sqrt.asDiagonal() *
                      eig.eigenvectors().transpose();
  if (r.determinant() < 0.0) {
    throw Error("reorient: transform contains a reflection");
  }
  Eigen::Vector3d v = r * Eigen::Vector3d(g[0], g[1], g[2]);
  double n = v.norm();
  if (n < 1e-12) throw Error("reorient: zero gradient");
  v /= n;
  return {v[0], v[1], v[2]};
}

// ---------------------------------------------------------------------------
// Registration
// ---------------------------------------------------------------------------

namespace {

// 2x downsampling by block averaging (partial blocks average what exists).
Volume downsample(const Volume& v) {
  Dims3 d{(v.dims.nx + 1) / 2, (v.dims.ny + 1) / 2, (v.dims.nz + 1) / 2};
  Volume out(d);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        double sum = 0.0;
        int count = 0;
        for (int dz = 0; dz < 2; ++dz) {
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              int sx = 2 * x + dx, sy = 2 * y + dy, sz = 2 * z + dz;
              if (sx < v.dims.nx && sy < v.dims.ny && sz < v.dims.nz) {
                sum += v.at(sx, sy, sz);
                ++count;
              }
            }
          }
        }
        out.at(x, y, z) = quantize_prediction(
            sum / count, 0, 0xFFFF);
      }
    }
  }
  return out;
}

// Parameters: tx ty tz rx ry rz sx sy sz kxy kxz kyz. Scales are offsets from
// 1, shears from 0; rotations in radians about the volume center.
AffineTransform params_to_pullback(const std::array<double, 12>& p,
                                   Dims3 dims) {
  double cx = 0.5 * (dims.nx - 1);
  double cy = 0.5 * (dims.ny - 1);
  double cz = 0.5 * (dims.nz - 1);

  auto mat = AffineTransform::identity();
  double crx = std::cos(p[3]), srx = std::sin(p[3]);
  double cry = std::cos(p[4]), sry = std::sin(p[4]);
  double crz = std::cos(p[5]), srz = std::sin(p[5]);

  // L = Rz Ry Rx * Scale * Shear
  double rxm[3][3] = {{1, 0, 0}, {0, crx, -srx}, {0, srx, crx}};
  double rym[3][3] = {{cry, 0, sry}, {0, 1, 0}, {-sry, 0, cry}};
  double rzm[3][3] = {{crz, -srz, 0}, {srz, crz, 0}, {0, 0, 1}};
  double rot[3][3];
  double tmp[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      tmp[r][c] = rym[r][0] * rxm[0][c] + rym[r][1] * rxm[1][c] +
                  rym[r][2] * rxm[2][c];
    }
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rot[r][c] = rzm[r][0] * tmp[0][c] + rzm[r][1] * tmp[1][c] +
                  rzm[r][2] * tmp[2][c];
    }
  }
  double scale[3] = {1.0 + p[6], 1.0 + p[7], 1.0 + p[8]};
  double shear[3][3] = {{1, p[9], p[10]}, {0, 1, p[11]}, {0, 0, 1}};
  double lin[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0;
      for (int k = 0; k < 3; ++k) {
        sum += rot[r][k] * scale[k] * shear[k][c];
      }
      lin[r][c] = sum;
    }
  }
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) mat.m[r][c] = lin[r][c];
    mat.m[r][3] = p[r] + (r == 0 ? cx : r == 1 ? cy : cz) -
                  (lin[r][0] * cx + lin[r][1] * cy + lin[r][2] * cz);
  }
  return mat;
}

double mse_cost(const Volume& reference, const Volume& moving,
                const AffineTransform& pullback) {
  double sum = 0.0;
  Dims3 d = reference.dims;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        std::array<double, 3> p = pullback.apply(
            {static_cast<double>(x), static_cast<double>(y),
             static_cast<double>(z)});
        double diff = sample_trilinear(moving, p[0], p[1], p[2]) -
                      static_cast<double>(reference.at(x, y, z));
        sum += diff * diff;
      }
    }
  }
  return sum / static_cast<double>(d.voxel_count());
}

}  // namespace

AffineTransform register_affine(const Volume& moving, const Volume& reference,
                                const RegistrationParams& params) {
  if (moving.dims != reference.dims) {
    throw Error("register: volumes must share dimensions");
  }
  if (params.levels < 1 || (params.dof != 6 && params.dof != 12)) {
    throw Error("register: bad parameters");
  }

  std::vector<Volume> ref_pyramid{reference};
  std::vector<Volume> mov_pyramid{moving};
  for (int l = 1; l < params.levels; ++l) {
    const Volume& prev = ref_pyramid.back();
    if (prev.dims.nx < 4 && prev.dims.ny < 4 && prev.dims.nz < 4) break;
    ref_pyramid.push_back(downsample(prev));
    mov_pyramid.push_back(downsample(mov_pyramid.back()));
  }

  std::array<double, 12> p{};  // identity
  int active = params.dof;

  for (int level = static_cast<int>(ref_pyramid.size()) - 1; level >= 0;
       --level) {
    const Volume& ref = ref_pyramid[static_cast<std::size_t>(level)];
    const Volume& mov = mov_pyramid[static_cast<std::size_t>(level)];
    double level_scale = static_cast<double>(1 << level);

    auto eval = [&](const std::array<double, 12>& q) {
      // Parameters live in full-resolution voxel units; translations rescale
      // per level, angles and scales do not.
      std::array<double, 12> scaled = q;
      for (int i = 0; i < 3; ++i) {
        scaled[static_cast<std::size_t>(i)] = q[static_cast<std::size_t>(i)] /
                                              level_scale;
      }
      return mse_cost(ref, mov, params_to_pullback(scaled, ref.dims));
    };

    int evals = 0;
    double best = eval(p);
    ++evals;

    // Subject-motion scale bounds keep the coarse levels from wandering into
    // distant basins of the blurred cost surface.
    auto in_bounds = [&](const std::array<double, 12>& q) {
      double trans_limit =
          0.25 * std::max({reference.dims.nx, reference.dims.ny,
                           reference.dims.nz});
      for (int i = 0; i < 3; ++i) {
        if (std::abs(q[static_cast<std::size_t>(i)]) > trans_limit) return false;
      }
      for (int i = 3; i < 6; ++i) {
        if (std::abs(q[static_cast<std::size_t>(i)]) > 0.35) return false;
      }
      for (int i = 6; i < 12; ++i) {
        if (std::abs(q[static_cast<std::size_t>(i)]) > 0.15) return false;
      }
      return true;
    };

    // Powell-style direction-set minimization. Coupled motions (rotation
    // about an off-center pivot needs a compensating translation) sit in
    // curved valleys where plain coordinate descent stalls; the derived
    // directions track those valleys. Entirely deterministic: fixed probe
    // pattern, fixed refinement count, fixed direction replacement rule.
    auto probe = [&](const std::array<double, 12>& base,
                     const std::array<double, 12>& dir, double t) {
      std::array<double, 12> q = base;
      for (std::size_t i = 0; i < 12; ++i) q[i] += t * dir[i];
      if (!in_bounds(q)) return 1e300;
      ++evals;
      return eval(q);
    };
    auto line_minimize = [&](std::array<double, 12>& point, double& value,
                             const std::array<double, 12>& dir) {
      static constexpr double kProbes[] = {-4.0, -2.0, -1.0, -0.5,
                                           0.5,  1.0,  2.0,  4.0};
      double best_t = 0.0, best_f = value;
      for (double t : kProbes) {
        double f = probe(point, dir, t);
        if (f < best_f) {
          best_f = f;
          best_t = t;
        }
      }
      double h = 0.5;
      for (int round = 0; round < 5; ++round, h *= 0.5) {
        for (double t : {best_t - h, best_t + h}) {
          double f = probe(point, dir, t);
          if (f < best_f) {
            best_f = f;
            best_t = t;
          }
        }
      }
      if (best_t != 0.0) {
        for (std::size_t i = 0; i < 12; ++i) point[i] += best_t * dir[i];
        value = best_f;
      }
    };

    std::vector<std::array<double, 12>> directions;
    for (int i = 0; i < active; ++i) {
      std::array<double, 12> dir{};
      double scale = i < 3 ? 1.0 * level_scale : (i < 6 ? 0.02 : 0.01);
      dir[static_cast<std::size_t>(i)] = scale;
      directions.push_back(dir);
    }

    for (int cycle = 0; cycle < 8 && evals < params.max_evals_per_level;
         ++cycle) {
      std::array<double, 12> cycle_start = p;
      double start_value = best;
      std::size_t biggest_drop_index = 0;
      double biggest_drop = -1.0;
      for (std::size_t d = 0;
           d < directions.size() && evals < params.max_evals_per_level; ++d) {
        double before = best;
        line_minimize(p, best, directions[d]);
        if (before - best > biggest_drop) {
          biggest_drop = before - best;
          biggest_drop_index = d;
        }
      }
      std::array<double, 12> travelled{};
      double norm = 0.0;
      for (std::size_t i = 0; i < 12; ++i) {
        travelled[i] = p[i] - cycle_start[i];
        norm += travelled[i] * travelled[i];
      }
      if (norm > 0.0 && evals < params.max_evals_per_level) {
        line_minimize(p, best, travelled);
        directions[biggest_drop_index] = travelled;
      }
      if (start_value - best <=
          params.convergence * (std::abs(start_value) + 1e-30)) {
        break;
      }
    }
  }

  // The optimizer works on the pull-back (reference -> moving); the stored
  // transform maps moving to reference.
  AffineTransform pullback = params_to_pullback(p, reference.dims);
  AffineTransform forward = invert(pullback);

  // Must not be worse than identity on the full-resolution volumes.
  double id_cost = mse_cost(reference, moving, AffineTransform::identity());
  double fit_cost = mse_cost(reference, moving, pullback);
  if (fit_cost >= id_cost) return AffineTransform::identity();
  return forward;
}

}  // namespace qdmr
