// Compiled with -mavx2 -mfma; only reached after a cpuid check in dispatch.cpp.
#include <immintrin.h>

#include <cmath>

#include "kernel_tables.hpp"

namespace qkm::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline double squared_distance_impl(const double* a, const double* b,
                                    std::size_t dim) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  if (i + 4 <= dim) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    i += 4;
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < dim; ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

inline double dot_impl(const double* a, const double* b, std::size_t dim) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  if (i + 4 <= dim) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < dim; ++i) sum += a[i] * b[i];
  return sum;
}

double squared_distance(const double* a, const double* b, std::size_t dim) {
  return squared_distance_impl(a, b, dim);
}

double dot(const double* a, const double* b, std::size_t dim) {
  return dot_impl(a, b, dim);
}

// Low dimensions vectorize across points instead of coordinates.
template <bool kTakeMin>
void distances_narrow(const double* points, std::size_t n, std::size_t dim,
                      const double* center, double* out) {
  std::size_t i = 0;
  if (dim <= 4) {
    for (; i + 4 <= n; i += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t j = 0; j < dim; ++j) {
        const __m256d p = _mm256_set_pd(points[(i + 3) * dim + j], points[(i + 2) * dim + j],
                                        points[(i + 1) * dim + j], points[i * dim + j]);
        const __m256d d = _mm256_sub_pd(p, _mm256_set1_pd(center[j]));
        acc = _mm256_fmadd_pd(d, d, acc);
      }
      if constexpr (kTakeMin) {
        _mm256_storeu_pd(out + i, _mm256_min_pd(acc, _mm256_loadu_pd(out + i)));
      } else {
        _mm256_storeu_pd(out + i, acc);
      }
    }
  }
  for (; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = points[i * dim + j] - center[j];
      d = std::fma(diff, diff, d);
    }
    if constexpr (kTakeMin) {
      if (d < out[i]) out[i] = d;
    } else {
      out[i] = d;
    }
  }
}

void update_min_distances(const double* points, std::size_t n, std::size_t dim,
                          const double* center, double* min_dist) {
  if (dim < 4) {
    distances_narrow<true>(points, n, dim, center, min_dist);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double d = squared_distance_impl(points + i * dim, center, dim);
    min_dist[i] = d < min_dist[i] ? d : min_dist[i];
  }
}

void squared_distances(const double* point, const double* points, std::size_t n,
                       std::size_t dim, double* out) {
  if (dim < 4) {
    distances_narrow<false>(points, n, dim, point, out);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = squared_distance_impl(points + i * dim, point, dim);
}

void matvec(const double* rows, std::size_t nrows, std::size_t dim,
            const double* x, double* out) {
  for (std::size_t r = 0; r < nrows; ++r) out[r] = dot_impl(rows + r * dim, x, dim);
}

void axpy(double alpha, const double* x, double* y, std::size_t len) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < len; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

Nearest nearest(const double* point, const double* centers, std::size_t k,
                std::size_t dim) {
  Nearest best{0, squared_distance_impl(point, centers, dim)};
  for (std::size_t c = 1; c < k; ++c) {
    const double d = squared_distance_impl(point, centers + c * dim, dim);
    if (d < best.dist_sq) best = {c, d};
  }
  return best;
}

}  // namespace

const KernelTable kAvx2Table{Isa::avx2, squared_distance, dot,
                             update_min_distances, squared_distances, matvec, axpy, nearest};

}  // namespace qkm::simd::detail
