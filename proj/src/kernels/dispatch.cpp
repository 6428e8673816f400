#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernel_tables.hpp"

namespace qkm::simd {
namespace {

bool cpu_has_avx2() {
#if defined(QKM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* default_table() {
  if (const char* env = std::getenv("QKM_SIMD")) {
    const std::string_view requested(env);
    if (requested == "scalar") return &detail::kScalarTable;
    if (requested == "avx2" && isa_available(Isa::avx2)) return kernels_for(Isa::avx2);
  }
  if (isa_available(Isa::avx2)) return kernels_for(Isa::avx2);
  return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{default_table()};
  return slot;
}

}  // namespace

const KernelTable& scalar_kernels() { return detail::kScalarTable; }

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2: {
      static const bool available = cpu_has_avx2();
      return available;
    }
  }
  return false;
}

const KernelTable* kernels_for(Isa isa) {
  if (!isa_available(isa)) return nullptr;
  switch (isa) {
    case Isa::scalar:
      return &detail::kScalarTable;
    case Isa::avx2:
#if defined(QKM_HAVE_AVX2)
      return &detail::kAvx2Table;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_relaxed); }

Isa active_isa() { return kernels().isa; }

void set_active_isa(Isa isa) {
  const KernelTable* table = kernels_for(isa);
  if (table == nullptr) {
    throw std::invalid_argument("kernel ISA not available: " + std::string(isa_name(isa)));
  }
  active_slot().store(table, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  throw std::invalid_argument("unknown kernel ISA: " + std::string(name));
}

}  // namespace qkm::simd
