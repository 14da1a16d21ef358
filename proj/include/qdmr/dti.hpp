#pragma once

#include <array>
#include <span>
#include <vector>

#include "qdmr/common.hpp"

namespace qdmr {

/// Symmetric diffusion tensor in mm^2/s. Positive definiteness is not
/// enforced; a least-squares fit may violate it and the prediction formula
/// stays well defined.
struct DiffusionTensor {
  double xx = 0.0, yy = 0.0, zz = 0.0;
  double xy = 0.0, xz = 0.0, yz = 0.0;
};

/// Precomputes the pseudo-inverse of the log-linear design matrix for a fixed
/// direction set, so per-voxel fits are a 6xN product. Throws when the design
/// is rank deficient (condition number above 1e8).
class DtiFitter {
public:
  DtiFitter(const std::vector<std::array<double, 3>>& directions, double b);

  DiffusionTensor fit(double s0, std::span<const double> signals) const;

  std::size_t direction_count() const { return n_; }

private:
  std::size_t n_ = 0;
  std::vector<double> pinv_;  // 6 x n, row-major
};

DiffusionTensor fit_dti(double s0, std::span<const double> signals,
                        const std::vector<std::array<double, 3>>& directions,
                        double b);

/// S = s0 * exp(-b g^T D g); antipodally symmetric in g.
double predict_dti(const DiffusionTensor& tensor, double s0,
                   const std::array<double, 3>& direction, double b);

}  // namespace qdmr
