#pragma once

// Distance and projection kernels with a scalar reference implementation and
// ISA-specific variants picked at runtime. The scalar table is the reference;
// every other table must agree with it up to summation-order rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace qkm::simd {

enum class Isa { scalar, avx2 };

struct Nearest {
  std::size_t index;
  double dist_sq;
};

struct KernelTable {
  Isa isa;
  double (*squared_distance)(const double* a, const double* b, std::size_t dim);
  double (*dot)(const double* a, const double* b, std::size_t dim);
  // min_dist[i] = min(min_dist[i], |points[i] - center|^2) for i < n.
  void (*update_min_distances)(const double* points, std::size_t n,
                               std::size_t dim, const double* center,
                               double* min_dist);
  // out[i] = |points[i] - point|^2 for i < n.
  void (*squared_distances)(const double* point, const double* points, std::size_t n,
                            std::size_t dim, double* out);
  // out[r] = <rows[r], x> for r < nrows.
  void (*matvec)(const double* rows, std::size_t nrows, std::size_t dim,
                 const double* x, double* out);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t len);
  // Nearest of k centers; ties resolve to the lowest index. k > 0.
  Nearest (*nearest)(const double* point, const double* centers, std::size_t k,
                     std::size_t dim);
};

const KernelTable& scalar_kernels();
/// Table for `isa`; nullptr when the variant is not compiled in or the CPU lacks it.
const KernelTable* kernels_for(Isa isa);
bool isa_available(Isa isa);

/// Active table. Defaults to the widest available ISA; the QKM_SIMD
/// environment variable ("scalar" / "avx2") overrides the default.
const KernelTable& kernels();
Isa active_isa();
/// Throws std::invalid_argument when the ISA is unavailable on this machine.
void set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return kernels().squared_distance(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline double squared_norm(std::span<const double> a) {
  return kernels().dot(a.data(), a.data(), a.size());
}

}  // namespace qkm::simd
