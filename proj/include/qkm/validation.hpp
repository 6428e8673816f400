#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qkm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  std::map<std::string, double> metrics;
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  // Fault injection: the oversampling check uses tau = 1/2, which no pair of
  // distributions can satisfy.
  bool break_oversampling = false;
};

/// Self-check suite over generated instances: sampler fidelity, rejection
/// exactness and iteration counts, oversampling, fallback rate, ANN contract
/// and monotonicity, (rho, delta) consistency, centering and power-law fits.
std::vector<CheckResult> run_validation(const ValidationOptions& options);

}  // namespace qkm
