#include "kernel_tables.hpp"

namespace qkm::simd::detail {
namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

double dot(const double* a, const double* b, std::size_t dim) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) sum += a[i] * b[i];
  return sum;
}

void update_min_distances(const double* points, std::size_t n, std::size_t dim,
                          const double* center, double* min_dist) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = squared_distance(points + i * dim, center, dim);
    min_dist[i] = d < min_dist[i] ? d : min_dist[i];
  }
}

void squared_distances(const double* point, const double* points, std::size_t n,
                       std::size_t dim, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = squared_distance(points + i * dim, point, dim);
}

void matvec(const double* rows, std::size_t nrows, std::size_t dim,
            const double* x, double* out) {
  for (std::size_t r = 0; r < nrows; ++r) out[r] = dot(rows + r * dim, x, dim);
}

void axpy(double alpha, const double* x, double* y, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

Nearest nearest(const double* point, const double* centers, std::size_t k,
                std::size_t dim) {
  Nearest best{0, squared_distance(point, centers, dim)};
  for (std::size_t c = 1; c < k; ++c) {
    const double d = squared_distance(point, centers + c * dim, dim);
    if (d < best.dist_sq) best = {c, d};
  }
  return best;
}

}  // namespace

const KernelTable kScalarTable{Isa::scalar, squared_distance, dot,
                               update_min_distances, squared_distances, matvec, axpy, nearest};

}  // namespace qkm::simd::detail
