#include "qdmr/dti.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace qdmr {

DtiFitter::DtiFitter(const std::vector<std::array<double, 3>>& directions,
                     double b)
    : n_(directions.size()) {
  if (n_ < 6) throw Error("dti: need at least 6 directions");
  if (b <= 0.0) throw Error("dti: b must be positive");

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n_), 6);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto& g = directions[i];
    Eigen::Index r = static_cast<Eigen::Index>(i);
    design(r, 0) = -b * g[0] * g[0];
    design(r, 1) = -b * g[1] * g[1];
    design(r, 2) = -b * g[2] * g[2];
    design(r, 3) = -b * 2.0 * g[0] * g[1];
    design(r, 4) = -b * 2.0 * g[0] * g[2];
    design(r, 5) = -b * 2.0 * g[1] * g[2];
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[5] <= 0.0 || sv[0] / sv[5] > 1e8) {
    throw Error("dti: rank-deficient design matrix");
  }
  Eigen::MatrixXd pinv =
      svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  pinv_.resize(6 * n_);
  for (int r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < n_; ++c) {
      pinv_[static_cast<std::size_t>(r) * n_ + c] =
          pinv(r, static_cast<Eigen::Index>(c));
    }
  }
}

DiffusionTensor DtiFitter::fit(double s0, std::span<const double> signals) const {
  if (signals.size() != n_) throw Error("dti: signal count mismatch");
  if (s0 <= 0.0) throw Error("dti: s0 must be positive");

  // y_i = ln(max(s_i, 1) / s0); values below the noise floor clamp to 1.
  std::array<double, 6> d{};
  for (std::size_t i = 0; i < n_; ++i) {
    double y = std::log(std::max(signals[i], 1.0) / s0);
    for (int r = 0; r < 6; ++r) {
      d[static_cast<std::size_t>(r)] +=
          pinv_[static_cast<std::size_t>(r) * n_ + i] * y;
    }
  }
  return {d[0], d[1], d[2], d[3], d[4], d[5]};
}

DiffusionTensor fit_dti(double s0, std::span<const double> signals,
                        const std::vector<std::array<double, 3>>& directions,
                        double b) {
  return DtiFitter(directions, b).fit(s0, signals);
}

double predict_dti(const DiffusionTensor& t, double s0,
                   const std::array<double, 3>& g, double b) {
  double quad = t.xx * g[0] * g[0] + t.yy * g[1] * g[1] + t.zz * g[2] * g[2] +
                2.0 * (t.xy * g[0] * g[1] + t.xz * g[0] * g[2] +
                       t.yz * g[1] * g[2]);
  return s0 * std::exp(-b * quad);
}

}  // namespace qdmr
