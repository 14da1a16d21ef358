#include "qdmr/qspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qdmr {

WeightMatrix compute_weights(
    const std::vector<std::array<double, 3>>& directions,
    const std::vector<int>& known_channels,
    const std::vector<int>& target_channels, QspacePde kind) {
  if (known_channels.empty()) throw Error("weights: empty known set");
  std::vector<char> is_known(directions.size(), 0);
  for (int c : known_channels) {
    if (c < 0 || c >= static_cast<int>(directions.size())) {
      throw Error("weights: bad known channel");
    }
    is_known[static_cast<std::size_t>(c)] = 1;
  }
  for (int c : target_channels) {
    if (c < 0 || c >= static_cast<int>(directions.size()) ||
        is_known[static_cast<std::size_t>(c)]) {
      throw Error("weights: target channels must be disjoint from known");
    }
  }

  SphereMesh mesh = build_sphere_mesh(directions);
  FemOperators ops = assemble_operators(mesh);

  // Dirichlet vertices: both antipodal vertices of every known channel,
  // ascending. Channel c owns vertices 2c and 2c+1.
  std::vector<int> known_sorted = known_channels;
  std::sort(known_sorted.begin(), known_sorted.end());
  std::vector<int> known_vertices;
  known_vertices.reserve(2 * known_sorted.size());
  for (int c : known_sorted) {
    known_vertices.push_back(2 * c);
    known_vertices.push_back(2 * c + 1);
  }
  DirichletSolver solver(ops, kind, known_vertices);

  std::size_t n = known_channels.size();
  std::size_t m = target_channels.size();
  WeightMatrix w;
  w.kind = kind;
  w.known_count = static_cast<int>(n);
  w.target_channels = target_channels;
  w.real_rows.assign(m, std::vector<double>(n, 0.0));

  // One indicator solve per known channel, in the caller's column order.
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> boundary(known_vertices.size(), 0.0);
    for (std::size_t k = 0; k < known_vertices.size(); ++k) {
      if (SphereMesh::channel_of_vertex(known_vertices[k]) ==
          known_channels[j]) {
        boundary[k] = 1.0;
      }
    }
    std::vector<double> u = solver.solve(boundary);
    for (std::size_t t = 0; t < m; ++t) {
      int c = target_channels[t];
      w.real_rows[t][j] =
          0.5 * (u[static_cast<std::size_t>(2 * c)] +
                 u[static_cast<std::size_t>(2 * c + 1)]);
    }
  }

  // Fixed-point quantization with exact row-sum renormalization: the
  // largest-magnitude entry absorbs the rounding defect.
  w.fixed_rows.assign(m, std::vector<std::int32_t>(n, 0));
  for (std::size_t t = 0; t < m; ++t) {
    std::int64_t sum = 0;
    std::size_t adjust = 0;
    double best_mag = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      double scaled = w.real_rows[t][j] * static_cast<double>(kWeightScale);
      double rounded = scaled >= 0.0 ? std::floor(scaled + 0.5)
                                     : -std::floor(-scaled + 0.5);
      w.fixed_rows[t][j] = static_cast<std::int32_t>(rounded);
      sum += w.fixed_rows[t][j];
      double mag = std::abs(w.real_rows[t][j]);
      if (mag > best_mag) {
        best_mag = mag;
        adjust = j;
      }
    }
    w.fixed_rows[t][adjust] +=
        static_cast<std::int32_t>(kWeightScale - sum);
  }
  return w;
}

Volume predict_volume(const std::vector<const Volume*>& known_volumes,
                      std::span<const std::int32_t> weight_row,
                      std::uint16_t clamp_lo, std::uint16_t clamp_hi,
                      int threads) {
  if (known_volumes.size() != weight_row.size()) {
    throw Error("predict: weight count mismatch");
  }
  if (known_volumes.empty()) throw Error("predict: no known volumes");
  Dims3 dims = known_volumes[0]->dims;
  for (const Volume* v : known_volumes) {
    if (v->dims != dims) throw Error("predict: dimension mismatch");
  }

  Volume out(dims);
  std::size_t nvox = dims.voxel_count();
  parallel_for(nvox, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::int64_t acc = 0;
      for (std::size_t j = 0; j < weight_row.size(); ++j) {
        acc += static_cast<std::int64_t>(weight_row[j]) *
               static_cast<std::int64_t>(known_volumes[j]->samples[i]);
      }
      // Round half away from zero at scale 2^-16, then clamp.
      std::int64_t rounded;
      if (acc >= 0) {
        rounded = (acc + kWeightScale / 2) >> 16;
      } else {
        rounded = -((-acc + kWeightScale / 2) >> 16);
      }
      std::int64_t lo = clamp_lo, hi = clamp_hi;
      rounded = std::max(lo, std::min(hi, rounded));
      out.samples[i] = static_cast<std::uint16_t>(rounded);
    }
  });
  return out;
}

std::vector<int> order_volumes(
    const std::vector<std::array<double, 3>>& directions,
    OrderingStrategy strategy, int start_index) {
  int n = static_cast<int>(directions.size());
  if (n < 1) throw Error("ordering: no directions");
  if (start_index < 0 || start_index >= n) {
    throw Error("ordering: bad start index");
  }
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  if (strategy == OrderingStrategy::Original) {
    for (int i = 0; i < n; ++i) order.push_back(i);
    return order;
  }

  std::vector<char> selected(static_cast<std::size_t>(n), 0);
  std::vector<double> min_dist(static_cast<std::size_t>(n),
                               std::numeric_limits<double>::infinity());
  auto pick = [&](int idx) {
    selected[static_cast<std::size_t>(idx)] = 1;
    order.push_back(idx);
    for (int i = 0; i < n; ++i) {
      if (selected[static_cast<std::size_t>(i)]) continue;
      double d = antipodal_angle(directions[static_cast<std::size_t>(i)],
                                 directions[static_cast<std::size_t>(idx)]);
      min_dist[static_cast<std::size_t>(i)] =
          std::min(min_dist[static_cast<std::size_t>(i)], d);
    }
  };
  pick(start_index);
  bool furthest = strategy == OrderingStrategy::Furthest;
  while (static_cast<int>(order.size()) < n) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (selected[static_cast<std::size_t>(i)]) continue;
      if (best < 0) {
        best = i;
        continue;
      }
      double di = min_dist[static_cast<std::size_t>(i)];
      double db = min_dist[static_cast<std::size_t>(best)];
      if (furthest ? di > db : di < db) best = i;  // ties keep lowest index
    }
    pick(best);
  }
  return order;
}

}  // namespace qdmr
