#include "qdmr/affine.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace qdmr {

AffineTransform multiply(const AffineTransform& a, const AffineTransform& b) {
  AffineTransform out;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      double sum = 0.0;
      for (std::size_t k = 0; k < 4; ++k) sum += a.m[r][k] * b.m[k][c];
      out.m[r][c] = sum;
    }
  }
  return out;
}

double linear_determinant(const AffineTransform& t) {
  const auto& m = t.m;
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

AffineTransform invert(const AffineTransform& t) {
  double det = linear_determinant(t);
  if (std::abs(det) <= 1e-9) throw Error("affine: singular linear part");
  const auto& m = t.m;
  AffineTransform inv;
  // Inverse of [L t; 0 1] is [L^-1, -L^-1 t; 0 1].
  inv.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  for (std::size_t r = 0; r < 3; ++r) {
    inv.m[r][3] = -(inv.m[r][0] * m[0][3] + inv.m[r][1] * m[1][3] +
                    inv.m[r][2] * m[2][3]);
  }
  inv.m[3] = {0.0, 0.0, 0.0, 1.0};
  return inv;
}

AffineTransform read_affine_ascii(const std::string& text) {
  std::istringstream ss(text);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(ss, line)) {
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (!ls.eof()) throw Error("affine: malformed number");
    if (vals.empty()) continue;
    rows.push_back(std::move(vals));
  }
  if (rows.size() != 4) throw Error("affine: expected 4 rows");
  AffineTransform t;
  for (std::size_t r = 0; r < 4; ++r) {
    if (rows[r].size() != 4) throw Error("affine: expected 4 values per row");
    for (std::size_t c = 0; c < 4; ++c) t.m[r][c] = rows[r][c];
  }
  for (std::size_t c = 0; c < 4; ++c) {
    double want = c == 3 ? 1.0 : 0.0;
    if (std::abs(t.m[3][c] - want) > 1e-12) {
      throw Error("affine: last row must be (0, 0, 0, 1)");
    }
  }
  t.m[3] = {0.0, 0.0, 0.0, 1.0};
  if (std::abs(linear_determinant(t)) <= 1e-9) {
    throw Error("affine: singular linear part");
  }
  return t;
}

std::string write_affine_ascii(const AffineTransform& t) {
  std::string out;
  char buf[64];
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", t.m[r][c]);
      if (c) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace qdmr
