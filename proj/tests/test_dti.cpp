#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "qdmr/dti.hpp"

using namespace qdmr;

namespace {

using Vec3 = std::array<double, 3>;

std::vector<Vec3> spread_directions(std::size_t count, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vec3> dirs;
  while (dirs.size() < count) {
    Vec3 g{normal(rng), normal(rng), normal(rng)};
    double n = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    if (n < 0.3) continue;
    for (double& c : g) c /= n;
    dirs.push_back(g);
  }
  return dirs;
}

std::vector<double> forward_signals(const DiffusionTensor& d, double s0,
                                    const std::vector<Vec3>& dirs, double b) {
  std::vector<double> out;
  for (const Vec3& g : dirs) out.push_back(predict_dti(d, s0, g, b));
  return out;
}

}  // namespace

TEST_CASE("dti: isotropic tensor recovered from noiseless signals") {
  DiffusionTensor truth{1e-3, 1e-3, 1e-3, 0, 0, 0};
  auto dirs = spread_directions(9, 1);
  double s0 = 1800.0, b = 700.0;
  auto signals = forward_signals(truth, s0, dirs, b);
  DiffusionTensor fit = fit_dti(s0, signals, dirs, b);
  CHECK(fit.xx == doctest::Approx(truth.xx).epsilon(1e-12));
  CHECK(fit.yy == doctest::Approx(truth.yy).epsilon(1e-12));
  CHECK(fit.zz == doctest::Approx(truth.zz).epsilon(1e-12));
  CHECK(std::abs(fit.xy) < 1e-15);
}

TEST_CASE("dti: anisotropic tensor recovered over 30 directions") {
  DiffusionTensor truth{1.7e-3, 0.3e-3, 0.3e-3, 0, 0, 0};
  auto dirs = spread_directions(30, 2);
  double s0 = 2500.0, b = 700.0;
  auto signals = forward_signals(truth, s0, dirs, b);
  DiffusionTensor fit = fit_dti(s0, signals, dirs, b);
  CHECK(fit.xx == doctest::Approx(truth.xx).epsilon(1e-9));
  CHECK(fit.yy == doctest::Approx(truth.yy).epsilon(1e-9));
  CHECK(fit.zz == doctest::Approx(truth.zz).epsilon(1e-9));

  // fit-then-predict reproduces noiseless inputs to 1e-9 relative
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    CHECK(predict_dti(fit, s0, dirs[i], b) ==
          doctest::Approx(signals[i]).epsilon(1e-9));
  }
}

TEST_CASE("dti: all signals equal s0 give the zero tensor") {
  auto dirs = spread_directions(8, 3);
  std::vector<double> signals(8, 900.0);
  DiffusionTensor fit = fit_dti(900.0, signals, dirs, 700.0);
  for (double c : {fit.xx, fit.yy, fit.zz, fit.xy, fit.xz, fit.yz}) {
    CHECK(std::abs(c) < 1e-15);
  }
}

TEST_CASE("dti: prediction is antipodally symmetric and isotropy is flat") {
  DiffusionTensor d{1.2e-3, 0.4e-3, 0.9e-3, 0.1e-3, -0.2e-3, 0.05e-3};
  auto dirs = spread_directions(12, 4);
  for (const Vec3& g : dirs) {
    Vec3 neg{-g[0], -g[1], -g[2]};
    CHECK(predict_dti(d, 1500, g, 700) == predict_dti(d, 1500, neg, 700));
  }

  DiffusionTensor zero{};
  for (const Vec3& g : dirs) CHECK(predict_dti(zero, 1234, g, 700) == 1234);

  DiffusionTensor iso{2e-3, 2e-3, 2e-3, 0, 0, 0};
  double expect = 1000 * std::exp(-700 * 2e-3);
  for (const Vec3& g : dirs) {
    CHECK(predict_dti(iso, 1000, g, 700) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("dti: fit invariant under joint permutation") {
  DiffusionTensor truth{1.1e-3, 0.6e-3, 0.8e-3, 0.2e-3, 0.1e-3, -0.1e-3};
  auto dirs = spread_directions(10, 5);
  double s0 = 2000.0, b = 1000.0;
  auto signals = forward_signals(truth, s0, dirs, b);
  DiffusionTensor a = fit_dti(s0, signals, dirs, b);
  std::vector<Vec3> dirs_perm(dirs.rbegin(), dirs.rend());
  std::vector<double> signals_perm(signals.rbegin(), signals.rend());
  DiffusionTensor c = fit_dti(s0, signals_perm, dirs_perm, b);
  CHECK(a.xx == doctest::Approx(c.xx).epsilon(1e-12));
  CHECK(a.xy == doctest::Approx(c.xy).epsilon(1e-12));
  CHECK(a.yz == doctest::Approx(c.yz).epsilon(1e-12));
}

TEST_CASE("dti: degenerate designs are errors") {
  // 6 copies of (almost) one direction cannot span the tensor space.
  std::vector<Vec3> degenerate(6, Vec3{1, 0, 0});
  std::vector<double> signals(6, 100.0);
  CHECK_THROWS_AS(fit_dti(1000, signals, degenerate, 700), Error);

  auto dirs = spread_directions(5, 6);
  std::vector<double> five(5, 100.0);
  CHECK_THROWS_AS(fit_dti(1000, five, dirs, 700), Error);
}
