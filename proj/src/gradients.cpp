#include "qdmr/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace qdmr {

namespace {

std::vector<double> parse_scalar_row(const std::string& line) {
  std::istringstream ss(line);
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  if (!ss.eof()) throw Error("gradients: malformed number");
  return out;
}

}  // namespace

std::vector<double> parse_bvals(const std::string& text) {
  std::vector<double> out = parse_scalar_row(text);
  if (out.empty()) throw Error("gradients: empty bval file");
  for (double b : out) {
    if (b < 0.0 || !std::isfinite(b)) throw Error("gradients: bad b-value");
  }
  return out;
}

std::vector<std::array<double, 3>> parse_bvecs(const std::string& text) {
  std::istringstream ss(text);
  std::array<std::vector<double>, 3> rows;
  std::string line;
  std::size_t row = 0;
  while (std::getline(ss, line)) {
    std::vector<double> vals = parse_scalar_row(line);
    if (vals.empty()) continue;  // blank line
    if (row >= 3) throw Error("gradients: bvec file must have 3 rows");
    rows[row++] = std::move(vals);
  }
  if (row != 3) throw Error("gradients: bvec file must have 3 rows");
  if (rows[0].size() != rows[1].size() || rows[0].size() != rows[2].size()) {
    throw Error("gradients: ragged bvec rows");
  }
  std::vector<std::array<double, 3>> out(rows[0].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {rows[0][i], rows[1][i], rows[2][i]};
  }
  return out;
}

std::vector<std::vector<int>> cluster_shells(const std::vector<double>& bvals,
                                             const std::vector<int>& indices,
                                             double relative_tolerance) {
  std::vector<int> order = indices;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return bvals[static_cast<std::size_t>(a)] <
           bvals[static_cast<std::size_t>(b)];
  });

  std::vector<std::vector<int>> shells;
  double running_sum = 0.0;
  for (int idx : order) {
    double b = bvals[static_cast<std::size_t>(idx)];
    if (!shells.empty()) {
      double mean = running_sum / static_cast<double>(shells.back().size());
      if (b <= mean * (1.0 + relative_tolerance)) {
        shells.back().push_back(idx);
        running_sum += b;
        continue;
      }
    }
    shells.push_back({idx});
    running_sum = b;
  }
  // Within a shell, restore acquisition order.
  for (auto& shell : shells) std::sort(shell.begin(), shell.end());
  return shells;
}

GradientTable read_gradients(const std::string& bval_text,
                             const std::string& bvec_text, double b0_threshold,
                             double shell_tolerance) {
  GradientTable table;
  table.bval_text = bval_text;
  table.bvec_text = bvec_text;
  table.bvals = parse_bvals(bval_text);
  table.bvecs = parse_bvecs(bvec_text);
  if (table.bvals.size() != table.bvecs.size()) {
    throw Error("gradients: bval/bvec count mismatch");
  }

  std::vector<int> dwis;
  for (std::size_t i = 0; i < table.bvals.size(); ++i) {
    auto& g = table.bvecs[i];
    double norm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    if (table.bvals[i] <= b0_threshold) {
      table.b0_group.push_back(static_cast<int>(i));
      if (norm > 0.0) {
        for (double& c : g) c /= norm;
      }
    } else {
      if (norm < 1e-12) {
        throw Error("gradients: nonzero b-value with zero gradient vector");
      }
      for (double& c : g) c /= norm;
      dwis.push_back(static_cast<int>(i));
    }
  }

  table.shells = cluster_shells(table.bvals, dwis, shell_tolerance);
  table.shell_of_volume.assign(table.bvals.size(), -1);
  for (std::size_t s = 0; s < table.shells.size(); ++s) {
    double sum = 0.0;
    for (int idx : table.shells[s]) {
      table.shell_of_volume[static_cast<std::size_t>(idx)] =
          static_cast<int>(s);
      sum += table.bvals[static_cast<std::size_t>(idx)];
    }
    table.shell_bvals.push_back(sum /
                                static_cast<double>(table.shells[s].size()));
  }
  return table;
}

std::string render_bvals(const std::vector<double>& bvals) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < bvals.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", bvals[i]);
    if (i) out += ' ';
    out += buf;
  }
  out += '\n';
  return out;
}

std::string render_bvecs(const std::vector<std::array<double, 3>>& bvecs) {
  std::string out;
  char buf[64];
  for (int row = 0; row < 3; ++row) {
    for (std::size_t i = 0; i < bvecs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g",
                    bvecs[i][static_cast<std::size_t>(row)]);
      if (i) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace qdmr
