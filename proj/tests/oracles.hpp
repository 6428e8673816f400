#pragma once

// Brute-force reference computations shared by the tests. They deliberately
// avoid the library's kernels so a kernel bug cannot hide itself.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "qkm/dataset.hpp"

namespace oracle {

inline double dist_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// Squared distance from row i to the nearest of the given rows.
inline double min_dist_sq(const qkm::Dataset& ds, std::size_t i,
                          const std::vector<std::size_t>& centers) {
  double best = std::numeric_limits<double>::infinity();
  for (const std::size_t c : centers) best = std::min(best, dist_sq(ds.row(i), ds.row(c)));
  return best;
}

// D^2 law over rows given the chosen rows.
inline std::vector<double> d2_law(const qkm::Dataset& ds, const std::vector<std::size_t>& centers) {
  std::vector<double> p(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) p[i] = min_dist_sq(ds, i, centers);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return p;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

inline qkm::Dataset from_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return qkm::Dataset(std::move(flat), rows.size(), rows.front().size());
}

// Optimal k-means cost by enumerating every labelling; only for tiny n.
inline double optimal_cost(const qkm::Dataset& ds, std::size_t k) {
  const std::size_t n = ds.size();
  const std::size_t dim = ds.dim();
  std::vector<std::size_t> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[labels[i] * dim + j] += ds.row(i)[j];
    }
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t l = labels[i];
      for (std::size_t j = 0; j < dim; ++j) {
        const double mean = sums[l * dim + j] / static_cast<double>(counts[l]);
        c += (ds.row(i)[j] - mean) * (ds.row(i)[j] - mean);
      }
    }
    best = std::min(best, c);
    std::size_t pos = 0;
    while (pos < n && ++labels[pos] == k) labels[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

}  // namespace oracle
