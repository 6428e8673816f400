#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qkm/ann.hpp"
#include "qkm/dataset.hpp"
#include "qkm/random.hpp"
#include "qkm/sampler_tree.hpp"

namespace qkm {

struct SeedingResult {
  std::vector<std::size_t> center_indices;
  PointSet center_coords;
  // Proposals consumed while choosing centers 2..k (length k-1). Zero for the
  // non-rejection seeders.
  std::vector<std::size_t> per_step_proposals;
  std::size_t fallback_count = 0;
  // Acceptance ratios that had to be clamped into [0, 1].
  std::size_t clamp_count = 0;
  std::chrono::nanoseconds elapsed{0};
  double final_cost = 0.0;
};

struct RejectionConfig {
  std::optional<std::size_t> chain_length;  // m; nullopt means unbounded
  double rho = 1.0;
  std::uint64_t seed = 0;
  AnnBackend ann = AnnBackend::exact;
  // Forces c1 instead of a uniform draw (diagnostics).
  std::optional<std::size_t> first_center;
};

/// ceil(m * ln(max(k, 2))); nullopt for unbounded m.
std::optional<std::size_t> proposal_cap(std::optional<std::size_t> chain_length, std::size_t k);

/// Proposal kappa(x | c1) = (|x|^2 + |c1|^2) / (frob_sq + n |c1|^2), sampled as a
/// mixture of the norm tree and the uniform distribution over rows.
class NormProposal {
 public:
  /// `tree` holds |x_i|^2 and may be null when frob_sq == 0.
  /// Throws DegenerateError when frob_sq + n * c1_norm_sq == 0.
  NormProposal(const SamplerTree* tree, double frob_sq, double c1_norm_sq, std::size_t n);

  std::size_t sample(Rng& rng) const;
  double probability(std::size_t i) const;
  double tree_share() const noexcept { return tree_share_; }
  double normalizer() const noexcept { return frob_sq_ + n_ * c1_norm_sq_; }

 private:
  const SamplerTree* tree_;
  double frob_sq_;
  double c1_norm_sq_;
  std::size_t n_;
  double tree_share_;
};

std::size_t sample_proposal(const SamplerTree* tree, double frob_sq, double c1_norm_sq,
                            std::size_t n, Rng& rng);

struct RejectionOutcome {
  std::size_t index;
  bool accepted;
  std::size_t iterations;
};

/// Bounded rejection sampling of the normalized `target_weights` from
/// `proposal`: accept x with probability target(x) / (bound * proposal(x)).
/// Throws std::invalid_argument when bound < 1. Debug builds verify that
/// target <= bound * proposal pointwise.
RejectionOutcome reject_sample(std::span<const double> target_weights,
                               const NormProposal& proposal, double bound,
                               std::size_t max_iters, Rng& rng);

/// Reported after each QKMeans step t = 2..k.
struct StepInfo {
  std::size_t step;                      // 1-based index of the center just chosen
  std::span<const std::size_t> before;   // centers c_1..c_{t-1}
  std::size_t chosen;
  std::size_t proposals;
  bool fell_back;
  bool zero_cost;                        // remaining cost was zero; uniform completion
};
using StepObserver = std::function<void(const StepInfo&)>;

/// Receives the exact sampling distribution used for the next center.
using MassObserver =
    std::function<void(std::span<const std::size_t> centers, std::span<const double> masses)>;

SeedingResult kmeanspp_exact(const Dataset& ds, std::size_t k, std::uint64_t seed,
                             const MassObserver& observer = {});

SeedingResult qkmeans(const Dataset& ds, std::size_t k, const RejectionConfig& cfg,
                      const StepObserver& observer = {});

/// (1 - delta) * costs / sum(costs) + delta / n
std::vector<double> perturbed_d2_masses(std::span<const double> costs, double delta);

SeedingResult rho_delta_reference(const Dataset& ds, std::size_t k, double rho, double delta,
                                  std::uint64_t seed, const MassObserver& observer = {});

SeedingResult uniform_seeding(const Dataset& ds, std::size_t k, std::uint64_t seed);

}  // namespace qkm
