#include "qdmr/fem.hpp"

#include <algorithm>
#include <cmath>

namespace qdmr {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

FemOperators assemble_operators(const SphereMesh& mesh) {
  int n = static_cast<int>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.triangles.size() * 12);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);

  for (const auto& tri : mesh.triangles) {
    const Vec3& p0 = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Vec3& p1 = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Vec3& p2 = mesh.vertices[static_cast<std::size_t>(tri[2])];
    Vec3 c = cross(sub(p1, p0), sub(p2, p0));
    double doubled_area = std::sqrt(dot(c, c));
    if (doubled_area < 1e-14) throw Error("fem: degenerate triangle");
    double area = 0.5 * doubled_area;

    // cot of the angle at corner k, opposite edge (k+1, k+2)
    const Vec3* p[3] = {&p0, &p1, &p2};
    for (int k = 0; k < 3; ++k) {
      const Vec3& a = *p[k];
      const Vec3& b = *p[(k + 1) % 3];
      const Vec3& d = *p[(k + 2) % 3];
      double cot = dot(sub(b, a), sub(d, a)) / doubled_area;
      int i = tri[static_cast<std::size_t>((k + 1) % 3)];
      int j = tri[static_cast<std::size_t>((k + 2) % 3)];
      double w = -0.5 * cot;  // off-diagonal contribution
      triplets.emplace_back(i, j, w);
      triplets.emplace_back(j, i, w);
      triplets.emplace_back(i, i, -w);
      triplets.emplace_back(j, j, -w);
    }
    for (int k = 0; k < 3; ++k) {
      mass[tri[static_cast<std::size_t>(k)]] += area / 3.0;
    }
  }

  FemOperators ops;
  ops.stiffness.resize(n, n);
  ops.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  ops.lumped_mass = std::move(mass);
  return ops;
}

DirichletSolver::DirichletSolver(const FemOperators& ops, QspacePde pde,
                                 std::vector<int> known_vertices)
    : total_(static_cast<int>(ops.stiffness.rows())),
      known_vertices_(std::move(known_vertices)) {
  if (known_vertices_.empty()) throw Error("fem: empty known set");
  if (!std::is_sorted(known_vertices_.begin(), known_vertices_.end())) {
    throw Error("fem: known vertices must be ascending");
  }

  std::vector<int> role(static_cast<std::size_t>(total_), -1);
  for (std::size_t i = 0; i < known_vertices_.size(); ++i) {
    int v = known_vertices_[i];
    if (v < 0 || v >= total_ || role[static_cast<std::size_t>(v)] != -1) {
      throw Error("fem: bad known vertex set");
    }
    role[static_cast<std::size_t>(v)] = static_cast<int>(i);
  }
  for (int v = 0; v < total_; ++v) {
    if (role[static_cast<std::size_t>(v)] == -1) free_vertices_.push_back(v);
  }

  Eigen::SparseMatrix<double> system;
  if (pde == QspacePde::LaplaceBeltrami) {
    system = ops.stiffness;
  } else {
    Eigen::SparseMatrix<double> k = ops.stiffness;
    Eigen::SparseMatrix<double> minv(total_, total_);
    std::vector<Eigen::Triplet<double>> mt;
    mt.reserve(static_cast<std::size_t>(total_));
    for (int i = 0; i < total_; ++i) {
      double m = ops.lumped_mass[i];
      if (m <= 0.0) throw Error("fem: nonpositive lumped mass");
      mt.emplace_back(i, i, 1.0 / m);
    }
    minv.setFromTriplets(mt.begin(), mt.end());
    system = k * minv * k;
  }

  std::vector<int> free_index(static_cast<std::size_t>(total_), -1);
  for (std::size_t i = 0; i < free_vertices_.size(); ++i) {
    free_index[static_cast<std::size_t>(free_vertices_[i])] =
        static_cast<int>(i);
  }

  std::vector<Eigen::Triplet<double>> ff, fk;
  for (int col = 0; col < system.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(system, col); it;
         ++it) {
      int r = static_cast<int>(it.row());
      int c = static_cast<int>(it.col());
      if (role[static_cast<std::size_t>(r)] != -1) continue;  // known row
      int fr = free_index[static_cast<std::size_t>(r)];
      if (role[static_cast<std::size_t>(c)] == -1) {
        ff.emplace_back(fr, free_index[static_cast<std::size_t>(c)],
                        it.value());
      } else {
        fk.emplace_back(fr, role[static_cast<std::size_t>(c)], it.value());
      }
    }
  }
  int nf = static_cast<int>(free_vertices_.size());
  int nk = static_cast<int>(known_vertices_.size());
  Eigen::SparseMatrix<double> a_ff(nf, nf);
  a_ff.setFromTriplets(ff.begin(), ff.end());
  coupling_.resize(nf, nk);
  coupling_.setFromTriplets(fk.begin(), fk.end());

  if (nf > 0) {
    factorization_.compute(a_ff);
    if (factorization_.info() != Eigen::Success) {
      throw Error("fem: singular free block");
    }
  }
}

std::vector<double> DirichletSolver::solve(
    const std::vector<double>& known_values) const {
  if (known_values.size() != known_vertices_.size()) {
    throw Error("fem: known value count mismatch");
  }
  std::vector<double> out(static_cast<std::size_t>(total_), 0.0);
  for (std::size_t i = 0; i < known_vertices_.size(); ++i) {
    out[static_cast<std::size_t>(known_vertices_[i])] = known_values[i];
  }
  if (free_vertices_.empty()) return out;

  Eigen::VectorXd uk(static_cast<Eigen::Index>(known_values.size()));
  for (std::size_t i = 0; i < known_values.size(); ++i) {
    uk[static_cast<Eigen::Index>(i)] = known_values[i];
  }
  Eigen::VectorXd rhs = -(coupling_ * uk);
  Eigen::VectorXd uf = factorization_.solve(rhs);
  if (factorization_.info() != Eigen::Success) {
    throw Error("fem: solve failed");
  }
  for (std::size_t i = 0; i < free_vertices_.size(); ++i) {
    out[static_cast<std::size_t>(free_vertices_[i])] =
        uf[static_cast<Eigen::Index>(i)];
  }
  return out;
}

std::vector<double> solve_dirichlet(const FemOperators& ops, QspacePde pde,
                                    const std::vector<int>& known_vertices,
                                    const std::vector<double>& known_values) {
  std::vector<int> verts = known_vertices;
  std::vector<std::size_t> order(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return verts[a] < verts[b]; });
  std::vector<int> sorted_verts(verts.size());
  std::vector<double> sorted_vals(verts.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_verts[i] = verts[order[i]];
    sorted_vals[i] = known_values[order[i]];
  }
  DirichletSolver solver(ops, pde, sorted_verts);
  return solver.solve(sorted_vals);
}

}  // namespace qdmr
