#pragma once

#include <array>
#include <vector>

#include "qdmr/common.hpp"

namespace qdmr {

constexpr double kMinDirectionSeparationDeg = 0.5;

/// Degenerate direction geometry (coplanar, duplicate, too few).
class MeshError : public Error {
public:
  using Error::Error;
};

/// Triangulated unit sphere over antipodally duplicated gradient directions.
/// Channel i owns vertices 2i (the direction) and 2i+1 (its exact antipode).
struct SphereMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 3>> triangles;  // outward-oriented

  int channel_count() const { return static_cast<int>(vertices.size() / 2); }
  static int channel_of_vertex(int v) { return v / 2; }
};

/// Angular metric folded over the antipodal symmetry: acos |g_i . g_j|.
double antipodal_angle(const std::array<double, 3>& a,
                       const std::array<double, 3>& b);

/// Convex hull of the 2c points {+-g_i}; equivalent to the surface of the 3D
/// Delaunay tessellation for points on a sphere. Deterministic for a given
/// input order. Throws on fewer than 3 independent directions or any folded
/// pair closer than 0.5 degrees.
SphereMesh build_sphere_mesh(const std::vector<std::array<double, 3>>& directions);

}  // namespace qdmr
