#include "qdmr/sphere_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace qdmr {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
double norm2(const Vec3& a) { return dot(a, a); }

constexpr double kEps = 1e-12;

struct Face {
  std::array<int, 3> v;
  Vec3 normal;          // unnormalized outward normal
  double offset;        // dot(normal, v0)
  std::array<int, 3> nb;  // neighbor face across edge (v[e], v[(e+1)%3])
  bool alive = true;
};

struct Hull {
  const std::vector<Vec3>& pts;
  std::vector<Face> faces;

  explicit Hull(const std::vector<Vec3>& p) : pts(p) {}

  double dist(int f, int q) const {
    return dot(faces[static_cast<std::size_t>(f)].normal,
               pts[static_cast<std::size_t>(q)]) -
           faces[static_cast<std::size_t>(f)].offset;
  }

  int add_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    f.normal = cross(sub(pts[static_cast<std::size_t>(b)], pts[static_cast<std::size_t>(a)]),
                     sub(pts[static_cast<std::size_t>(c)], pts[static_cast<std::size_t>(a)]));
    f.offset = dot(f.normal, pts[static_cast<std::size_t>(a)]);
    f.nb = {-1, -1, -1};
    faces.push_back(f);
    return static_cast<int>(faces.size()) - 1;
  }

  // Initial tetrahedron with outward-oriented faces; points are scanned in
  // index order so the result is deterministic.
  void init() {
    int n = static_cast<int>(pts.size());
    int p0 = 0, p1 = -1, p2 = -1, p3 = -1;
    for (int i = 1; i < n && p1 < 0; ++i) {
      if (norm2(sub(pts[static_cast<std::size_t>(i)], pts[0])) > kEps) p1 = i;
    }
    if (p1 < 0) throw MeshError("sphere mesh: degenerate directions");
    for (int i = p1 + 1; i < n && p2 < 0; ++i) {
      Vec3 c = cross(sub(pts[static_cast<std::size_t>(p1)], pts[0]),
                     sub(pts[static_cast<std::size_t>(i)], pts[0]));
      if (norm2(c) > kEps) p2 = i;
    }
    if (p2 < 0) throw MeshError("sphere mesh: fewer than 3 independent directions");
    Vec3 nrm = cross(sub(pts[static_cast<std::size_t>(p1)], pts[0]),
                     sub(pts[static_cast<std::size_t>(p2)], pts[0]));
    double off = dot(nrm, pts[0]);
    double best = 0.0;
    for (int i = 1; i < n; ++i) {
      double d = dot(nrm, pts[static_cast<std::size_t>(i)]) - off;
      if (std::abs(d) > std::abs(best) && std::abs(d) > kEps) {
        // Take the first point clearing the threshold; prefer none later.
        p3 = i;
        best = d;
        break;
      }
    }
    if (p3 < 0) throw MeshError("sphere mesh: fewer than 3 independent directions");
    if (best > 0) std::swap(p1, p2);  // make (p0,p1,p2) face away from p3

    int f0 = add_face(p0, p1, p2);
    int f1 = add_face(p0, p3, p1);
    int f2 = add_face(p1, p3, p2);
    int f3 = add_face(p2, p3, p0);
    faces[static_cast<std::size_t>(f0)].nb = {f1, f2, f3};
    faces[static_cast<std::size_t>(f1)].nb = {f3, f2, f0};
    faces[static_cast<std::size_t>(f2)].nb = {f1, f3, f0};
    faces[static_cast<std::size_t>(f3)].nb = {f2, f1, f0};
  }

  void insert(int q) {
    // Most-visible face as the flood-fill seed.
    int seed = -1;
    double best = kEps;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!faces[f].alive) continue;
      double d = dist(static_cast<int>(f), q);
      if (d > best) {
        best = d;
        seed = static_cast<int>(f);
      }
    }
    if (seed < 0) {
      // On-sphere inputs are always hull vertices; reaching here means a
      // duplicate slipped past the separation check.
      throw MeshError("sphere mesh: point inside hull (near-duplicate direction)");
    }

    // Flood fill across neighbors; coplanar faces (|dist| <= eps) join the
    // visible region so the new cone re-triangulates flat patches cleanly.
    std::vector<int> visible{seed};
    std::vector<char> in_visible(faces.size(), 0);
    in_visible[static_cast<std::size_t>(seed)] = 1;
    for (std::size_t at = 0; at < visible.size(); ++at) {
      int f = visible[at];
      for (int e = 0; e < 3; ++e) {
        int g = faces[static_cast<std::size_t>(f)].nb[static_cast<std::size_t>(e)];
        if (g < 0 || in_visible[static_cast<std::size_t>(g)] ||
            !faces[static_cast<std::size_t>(g)].alive) {
          continue;
        }
        if (dist(g, q) > -kEps) {
          in_visible[static_cast<std::size_t>(g)] = 1;
          visible.push_back(g);
        }
      }
    }

    // Horizon: directed edges of visible faces whose neighbor stays hidden.
    struct HorizonEdge {
      int a, b;
      int hidden_face;
      int hidden_edge;  // edge slot in the hidden face
    };
    std::vector<HorizonEdge> horizon;
    for (int f : visible) {
      for (int e = 0; e < 3; ++e) {
        int g = faces[static_cast<std::size_t>(f)].nb[static_cast<std::size_t>(e)];
        if (g >= 0 && in_visible[static_cast<std::size_t>(g)]) continue;
        int a = faces[static_cast<std::size_t>(f)].v[static_cast<std::size_t>(e)];
        int b = faces[static_cast<std::size_t>(f)].v[static_cast<std::size_t>((e + 1) % 3)];
        int hidden_edge = -1;
        for (int e2 = 0; e2 < 3; ++e2) {
          if (faces[static_cast<std::size_t>(g)].nb[static_cast<std::size_t>(e2)] == f) {
            hidden_edge = e2;
            break;
          }
        }
        horizon.push_back({a, b, g, hidden_edge});
      }
    }
    if (horizon.empty()) throw MeshError("sphere mesh: empty horizon");

    for (int f : visible) faces[static_cast<std::size_t>(f)].alive = false;

    // Cone of new faces (a, b, q); link ring neighbors via the shared a/b
    // endpoints.
    std::map<int, int> face_starting_at;  // horizon endpoint a -> new face
    std::vector<int> created;
    created.reserve(horizon.size());
    for (const HorizonEdge& h : horizon) {
      int nf = add_face(h.a, h.b, q);
      faces[static_cast<std::size_t>(nf)].nb[0] = h.hidden_face;
      faces[static_cast<std::size_t>(h.hidden_face)]
          .nb[static_cast<std::size_t>(h.hidden_edge)] = nf;
      face_starting_at[h.a] = nf;
      created.push_back(nf);
    }
    for (std::size_t k = 0; k < horizon.size(); ++k) {
      int nf = created[k];
      auto next = face_starting_at.find(horizon[k].b);
      if (next == face_starting_at.end()) {
        throw MeshError("sphere mesh: broken horizon loop");
      }
      // edge 1 of nf is (b, q); edge 2 of the next face is (q, a=b).
      faces[static_cast<std::size_t>(nf)].nb[1] = next->second;
      faces[static_cast<std::size_t>(next->second)].nb[2] = nf;
    }
  }
};

}  // namespace

double antipodal_angle(const Vec3& a, const Vec3& b) {
  double d = std::abs(dot(a, b));
  double na = std::sqrt(norm2(a)), nb = std::sqrt(norm2(b));
  d /= (na * nb);
  return std::acos(std::min(1.0, d));
}

SphereMesh build_sphere_mesh(const std::vector<Vec3>& directions) {
  if (directions.size() < 3) {
    throw MeshError("sphere mesh: need at least 3 directions");
  }
  std::vector<Vec3> unit(directions.size());
  for (std::size_t i = 0; i < directions.size(); ++i) {
    double n = std::sqrt(norm2(directions[i]));
    if (n < 1e-12) throw MeshError("sphere mesh: zero direction");
    unit[i] = {directions[i][0] / n, directions[i][1] / n,
               directions[i][2] / n};
  }
  double min_sep = kMinDirectionSeparationDeg * std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (std::size_t j = i + 1; j < unit.size(); ++j) {
      if (antipodal_angle(unit[i], unit[j]) <= min_sep) {
        throw MeshError("sphere mesh: directions " + std::to_string(i) + " and " +
                    std::to_string(j) + " are closer than 0.5 degrees");
      }
    }
  }

  SphereMesh mesh;
  mesh.vertices.resize(2 * unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    mesh.vertices[2 * i] = unit[i];
    mesh.vertices[2 * i + 1] = {-unit[i][0], -unit[i][1], -unit[i][2]};
  }

  Hull hull(mesh.vertices);
  hull.init();
  std::vector<char> in_hull(mesh.vertices.size(), 0);
  for (const Face& f : hull.faces) {
    for (int v : f.v) in_hull[static_cast<std::size_t>(v)] = 1;
  }
  for (int q = 0; q < static_cast<int>(mesh.vertices.size()); ++q) {
    if (in_hull[static_cast<std::size_t>(q)]) continue;
    hull.insert(q);
  }

  for (const Face& f : hull.faces) {
    if (!f.alive) continue;
    std::array<int, 3> t = f.v;
    // Canonical rotation: smallest vertex first, orientation preserved.
    int s = static_cast<int>(
        std::min_element(t.begin(), t.end()) - t.begin());
    std::array<int, 3> rot = {t[static_cast<std::size_t>(s)],
                              t[static_cast<std::size_t>((s + 1) % 3)],
                              t[static_cast<std::size_t>((s + 2) % 3)]};
    mesh.triangles.push_back(rot);
  }
  std::sort(mesh.triangles.begin(), mesh.triangles.end());

  // Watertight & orientable: each undirected edge must appear exactly once
  // in each direction; every vertex must be used.
  std::map<std::pair<int, int>, int> edge_count;
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[static_cast<std::size_t>(e)];
      int b = t[static_cast<std::size_t>((e + 1) % 3)];
      edge_count[{a, b}]++;
      used[static_cast<std::size_t>(a)] = 1;
    }
  }
  for (const auto& [edge, count] : edge_count) {
    auto rev = edge_count.find({edge.second, edge.first});
    if (count != 1 || rev == edge_count.end() || rev->second != 1) {
      throw MeshError("sphere mesh: triangulation is not watertight");
    }
  }
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (!used[v]) {
      throw MeshError("sphere mesh: vertex " + std::to_string(v) +
                  " not on the hull (near-duplicate direction)");
    }
  }
  return mesh;
}

}  // namespace qdmr
