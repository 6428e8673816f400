#include "qkm/seeding.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qkm/analysis.hpp"
#include "qkm/error.hpp"
#include "qkm/kernels.hpp"

namespace qkm {

namespace {

using Clock = std::chrono::steady_clock;

void check_k(const Dataset& ds, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (k > ds.size()) {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds n = " +
                                std::to_string(ds.size()));
  }
}

// Uniform over rows; a row that is already a center is redrawn, and after n
// failed draws the first free row from a random offset is taken.
std::size_t pick_unchosen(Rng& rng, const std::vector<char>& chosen) {
  const std::size_t n = chosen.size();
  for (std::size_t attempt = 0; attempt < n; ++attempt) {
    const std::size_t i = uniform_index(rng, n);
    if (!chosen[i]) return i;
  }
  const std::size_t start = uniform_index(rng, n);
  for (std::size_t off = 0; off < n; ++off) {
    const std::size_t i = (start + off) % n;
    if (!chosen[i]) return i;
  }
  throw StateError("no unchosen rows left");
}

// Inverse-CDF draw from nonnegative weights with the given positive total.
std::size_t sample_discrete(std::span<const double> weights, double total, Rng& rng) {
  const double target = uniform01(rng) * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    last_positive = i;
    if (target < cumulative) return i;
  }
  return last_positive;
}

void finish(const Dataset& ds, SeedingResult& result, Clock::time_point start) {
  result.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start);
  result.center_coords = gather_rows(ds, result.center_indices);
  result.final_cost = cost(ds, result.center_coords);
}

bool all_rows_covered(const Dataset& ds, std::span<const std::size_t> centers) {
  const PointSet coords = gather_rows(ds, centers);
  const auto& kern = simd::kernels();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (kern.nearest(ds.row(i).data(), coords.data().data(), coords.size(), ds.dim()).dist_sq > 0.0) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::optional<std::size_t> proposal_cap(std::optional<std::size_t> chain_length, std::size_t k) {
  if (!chain_length) return std::nullopt;
  if (*chain_length == 0) throw std::invalid_argument("chain length m must be at least 1");
  const double kk = static_cast<double>(std::max<std::size_t>(k, 2));
  return static_cast<std::size_t>(std::ceil(static_cast<double>(*chain_length) * std::log(kk)));
}

NormProposal::NormProposal(const SamplerTree* tree, double frob_sq, double c1_norm_sq,
                           std::size_t n)
    : tree_(tree), frob_sq_(frob_sq), c1_norm_sq_(c1_norm_sq), n_(n) {
  const double denom = frob_sq + static_cast<double>(n) * c1_norm_sq;
  if (!(denom > 0.0)) throw DegenerateError("proposal has zero mass: all points at the origin");
  if (frob_sq > 0.0 && tree == nullptr) {
    throw std::invalid_argument("a norm tree is required when frob_sq > 0");
  }
  tree_share_ = frob_sq / denom;
}

std::size_t NormProposal::sample(Rng& rng) const {
  if (uniform01(rng) < tree_share_) return tree_->sample(rng);
  return uniform_index(rng, n_);
}

double NormProposal::probability(std::size_t i) const {
  const double norm_sq = tree_ != nullptr ? tree_->weight(i) : 0.0;
  return (norm_sq + c1_norm_sq_) / normalizer();
}

std::size_t sample_proposal(const SamplerTree* tree, double frob_sq, double c1_norm_sq,
                            std::size_t n, Rng& rng) {
  return NormProposal(tree, frob_sq, c1_norm_sq, n).sample(rng);
}

RejectionOutcome reject_sample(std::span<const double> target_weights,
                               const NormProposal& proposal, double bound,
                               std::size_t max_iters, Rng& rng) {
  if (!(bound >= 1.0)) throw std::invalid_argument("rejection bound M must be >= 1");
  const double target_total =
      std::accumulate(target_weights.begin(), target_weights.end(), 0.0);
  if (!(target_total > 0.0)) throw DegenerateError("rejection target has zero mass");
#ifndef NDEBUG
  for (std::size_t i = 0; i < target_weights.size(); ++i) {
    const double mu = target_weights[i] / target_total;
    if (mu > bound * proposal.probability(i) * (1.0 + 1e-12)) {
      throw std::logic_error("rejection bound violated at index " + std::to_string(i));
    }
  }
#endif
  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    const std::size_t x = proposal.sample(rng);
    const double ratio = (target_weights[x] / target_total) / (bound * proposal.probability(x));
    if (uniform01(rng) < ratio) return {x, true, iter};
  }
  return {0, false, max_iters};
}

SeedingResult kmeanspp_exact(const Dataset& ds, std::size_t k, std::uint64_t seed,
                             const MassObserver& observer) {
  check_k(ds, k);
  const auto start = Clock::now();
  const std::size_t n = ds.size();
  const auto& kern = simd::kernels();
  Rng rng(seed);

  SeedingResult result;
  result.center_indices.reserve(k);
  std::vector<char> chosen(n, 0);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<double> masses;

  auto add_center = [&](std::size_t c) {
    result.center_indices.push_back(c);
    chosen[c] = 1;
    kern.update_min_distances(ds.data().data(), n, ds.dim(), ds.row(c).data(), min_dist.data());
  };

  add_center(uniform_index(rng, n));
  for (std::size_t t = 2; t <= k; ++t) {
    const double total = std::accumulate(min_dist.begin(), min_dist.end(), 0.0);
    std::size_t next;
    if (total > 0.0) {
      if (observer) {
        masses.resize(n);
        for (std::size_t i = 0; i < n; ++i) masses[i] = min_dist[i] / total;
        observer(result.center_indices, masses);
      }
      next = sample_discrete(min_dist, total, rng);
    } else {
      next = pick_unchosen(rng, chosen);
    }
    add_center(next);
  }
  result.per_step_proposals.assign(k - 1, 0);
  finish(ds, result, start);
  return result;
}

SeedingResult qkmeans(const Dataset& ds, std::size_t k, const RejectionConfig& cfg,
                      const StepObserver& observer) {
  check_k(ds, k);
  if (!ds.centered()) throw std::invalid_argument("qkmeans requires a centered dataset");
  const std::optional<std::size_t> cap = proposal_cap(cfg.chain_length, k);
  if (cfg.first_center && *cfg.first_center >= ds.size()) {
    throw std::invalid_argument("first_center is not a valid row");
  }
  auto ann = make_ann_index(cfg.ann, cfg.rho, derive_seed(cfg.seed, stream::kAnn));

  const auto start = Clock::now();
  ann->reserve_keys(ds.size());
  const std::size_t n = ds.size();
  const auto& kern = simd::kernels();
  Rng rng(cfg.seed);

  std::vector<double> norm_sq(n);
  for (std::size_t i = 0; i < n; ++i) norm_sq[i] = kern.dot(ds.row(i).data(), ds.row(i).data(), ds.dim());
  const double frob_sq = ds.frob_sq();
  std::optional<SamplerTree> tree;
  if (frob_sq > 0.0) tree.emplace(norm_sq);

  SeedingResult result;
  result.center_indices.reserve(k);
  result.per_step_proposals.reserve(k - 1);
  std::vector<char> chosen(n, 0);

  const std::size_t c1 = cfg.first_center ? *cfg.first_center : uniform_index(rng, n);
  result.center_indices.push_back(c1);
  chosen[c1] = 1;
  ann->insert(ds.row(c1));

  const double c1_norm_sq = norm_sq[c1];
  bool zero_cost = frob_sq + static_cast<double>(n) * c1_norm_sq <= 0.0;
  std::optional<NormProposal> proposal;
  if (!zero_cost) proposal.emplace(tree ? &*tree : nullptr, frob_sq, c1_norm_sq, n);
  const double inv_rho = 1.0 / ann->rho();
  // Unbounded chains re-check for a fully covered dataset this often.
  const std::size_t coverage_period = std::max<std::size_t>(n, 4096);

  for (std::size_t t = 2; t <= k; ++t) {
    std::size_t proposals = 0;
    std::optional<std::size_t> accepted;
    while (!zero_cost && (!cap || proposals < *cap)) {
      const std::size_t x = proposal->sample(rng);
      ++proposals;
      const double approx_cost = ann->query_row(x, ds.row(x)).dist_sq;
      const double denom = 2.0 * inv_rho * (norm_sq[x] + c1_norm_sq);
      double r = denom > 0.0 ? approx_cost / denom : 0.0;
      if (r > 1.0 || r < 0.0) {
        ++result.clamp_count;
        r = std::clamp(r, 0.0, 1.0);
      }
      if (uniform01(rng) < r) {
        accepted = x;
        break;
      }
      if (!cap && proposals % coverage_period == 0 &&
          all_rows_covered(ds, result.center_indices)) {
        zero_cost = true;
      }
    }

    std::size_t next;
    bool fell_back = false;
    if (accepted) {
      next = *accepted;
    } else {
      next = pick_unchosen(rng, chosen);
      if (!zero_cost) {
        fell_back = true;
        ++result.fallback_count;
      }
    }
    result.per_step_proposals.push_back(proposals);
    result.center_indices.push_back(next);
    chosen[next] = 1;
    ann->insert(ds.row(next));
    if (observer) {
      observer(StepInfo{t, std::span(result.center_indices).first(t - 1), next, proposals,
                        fell_back, zero_cost});
    }
  }
  finish(ds, result, start);
  return result;
}

std::vector<double> perturbed_d2_masses(std::span<const double> costs, double delta) {
  if (!(delta >= 0.0 && delta < 0.5)) throw std::invalid_argument("delta must lie in [0, 0.5)");
  const double total = std::accumulate(costs.begin(), costs.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateError("D2 distribution undefined: total cost is zero");
  const double uniform = delta / static_cast<double>(costs.size());
  std::vector<double> masses(costs.size());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    masses[i] = (1.0 - delta) * (costs[i] / total) + uniform;
  }
  return masses;
}

SeedingResult rho_delta_reference(const Dataset& ds, std::size_t k, double rho, double delta,
                                  std::uint64_t seed, const MassObserver& observer) {
  check_k(ds, k);
  if (!(delta >= 0.0 && delta < 0.5)) throw std::invalid_argument("delta must lie in [0, 0.5)");
  const AnnBackend backend = rho == 1.0 ? AnnBackend::exact : AnnBackend::lsh;
  auto ann = make_ann_index(backend, rho, derive_seed(seed, stream::kAnn));

  const auto start = Clock::now();
  ann->reserve_keys(ds.size());
  const std::size_t n = ds.size();
  Rng rng(seed);
  SeedingResult result;
  std::vector<char> chosen(n, 0);
  std::vector<double> approx_cost(n);

  auto add_center = [&](std::size_t c) {
    result.center_indices.push_back(c);
    chosen[c] = 1;
    ann->insert(ds.row(c));
  };

  add_center(uniform_index(rng, n));
  for (std::size_t t = 2; t <= k; ++t) {
    for (std::size_t i = 0; i < n; ++i) approx_cost[i] = ann->query_row(i, ds.row(i)).dist_sq;
    const double total = std::accumulate(approx_cost.begin(), approx_cost.end(), 0.0);
    if (!(total > 0.0)) {
      add_center(pick_unchosen(rng, chosen));
      continue;
    }
    const std::vector<double> masses = perturbed_d2_masses(approx_cost, delta);
    if (observer) observer(result.center_indices, masses);
    add_center(sample_discrete(masses, std::accumulate(masses.begin(), masses.end(), 0.0), rng));
  }
  result.per_step_proposals.assign(k - 1, 0);
  finish(ds, result, start);
  return result;
}

SeedingResult uniform_seeding(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  check_k(ds, k);
  const auto start = Clock::now();
  Rng rng(seed);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, ds.size() - i)]);
  }
  SeedingResult result;
  result.center_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  result.per_step_proposals.assign(k - 1, 0);
  finish(ds, result, start);
  return result;
}

}  // namespace qkm
