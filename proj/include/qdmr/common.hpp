#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qdmr {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Dims3 {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  bool operator==(const Dims3&) const = default;
};

inline std::size_t voxel_index(const Dims3& d, int x, int y, int z) {
  return static_cast<std::size_t>(x) +
         static_cast<std::size_t>(d.nx) *
             (static_cast<std::size_t>(y) +
              static_cast<std::size_t>(d.ny) * static_cast<std::size_t>(z));
}

/// A single 3D scan; samples are 16-bit intensities in x-fastest order.
struct Volume {
  Dims3 dims;
  std::vector<std::uint16_t> samples;

  Volume() = default;
  Volume(Dims3 d, std::uint16_t fill = 0)
      : dims(d), samples(d.voxel_count(), fill) {}

  std::uint16_t at(int x, int y, int z) const {
    return samples[voxel_index(dims, x, y, z)];
  }
  std::uint16_t& at(int x, int y, int z) {
    return samples[voxel_index(dims, x, y, z)];
  }
};

/// Round half away from zero, then clamp. The one quantization rule shared by
/// every prediction path, so the decoder can replay encoder predictions
/// exactly.
inline std::uint16_t quantize_prediction(double value, std::uint16_t lo,
                                         std::uint16_t hi) {
  double rounded = value >= 0.0 ? std::floor(value + 0.5)
                                : -std::floor(-value + 0.5);
  if (rounded < static_cast<double>(lo)) return lo;
  if (rounded > static_cast<double>(hi)) return hi;
  return static_cast<std::uint16_t>(rounded);
}

inline std::pair<std::uint16_t, std::uint16_t>
value_range(const std::vector<std::uint16_t>& samples) {
  std::uint16_t lo = 0xFFFF, hi = 0;
  for (std::uint16_t v : samples) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (samples.empty()) return {0, 0};
  return {lo, hi};
}

int resolve_thread_count(int requested);

/// Static partition of [0, n) across workers. Results must not depend on the
/// worker count; callers keep per-index work independent (Jacobi style).
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Same, but hands the body a stable worker slot for per-worker reductions.
void parallel_for_indexed(
    std::size_t n, int threads,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace qdmr
