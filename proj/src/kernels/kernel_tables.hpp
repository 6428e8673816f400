#pragma once

#include "qkm/kernels.hpp"

namespace qkm::simd::detail {

extern const KernelTable kScalarTable;
#if defined(QKM_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace qkm::simd::detail
