#include "qkm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "qkm/analysis.hpp"
#include "qkm/ann.hpp"
#include "qkm/dataset.hpp"
#include "qkm/kernels.hpp"
#include "qkm/random.hpp"
#include "qkm/sampler_tree.hpp"
#include "qkm/seeding.hpp"

namespace qkm {

namespace {

// Exact cost(x, C) for every row.
std::vector<double> point_costs(const Dataset& ds, std::span<const std::size_t> centers) {
  const PointSet coords = gather_rows(ds, centers);
  return assign(ds, coords).dist_sq;
}

Dataset blob_instance(std::size_t n, std::size_t dim, std::uint64_t seed) {
  return preprocess(gen_gaussian_mixture(n, dim, 5, 3.0, seed));
}

std::string format(const char* what, double value) {
  std::ostringstream out;
  out << what << value;
  return out.str();
}

CheckResult check_sampler_chi_square(std::uint64_t seed) {
  CheckResult r{"sampler_chi_square", false, {}, {}};
  const std::vector<double> weights{9.0, 16.0};
  const SamplerTree tree(weights);
  Rng rng(seed);
  constexpr std::size_t kDraws = 100000;
  std::size_t ones = 0;
  for (std::size_t i = 0; i < kDraws; ++i) ones += tree.sample(rng);
  const double e0 = 0.36 * kDraws;
  const double e1 = 0.64 * kDraws;
  const double o1 = static_cast<double>(ones);
  const double o0 = kDraws - o1;
  const double chi2 = (o0 - e0) * (o0 - e0) / e0 + (o1 - e1) * (o1 - e1) / e1;
  // 99th percentile of chi-square with one degree of freedom.
  r.passed = chi2 < 6.634896601;
  r.metrics["chi2"] = chi2;
  r.detail = format("chi2 = ", chi2);
  return r;
}

CheckResult check_sampler_rebuild(std::uint64_t seed) {
  CheckResult r{"sampler_update_rebuild", true, {}, {}};
  Rng rng(seed);
  double worst = 0.0;
  for (int seq = 0; seq < 100; ++seq) {
    const std::size_t n = 1 + uniform_index(rng, 200);
    std::vector<double> w(n);
    for (double& x : w) x = uniform01(rng) + 0.01;
    SamplerTree tree(w);
    for (int u = 0; u < 50; ++u) {
      const std::size_t i = uniform_index(rng, n);
      w[i] = uniform01(rng) < 0.2 ? 0.0 : uniform01(rng) * 10.0;
      if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) w[i] = 1.0;
      tree.update(i, w[i]);
    }
    const SamplerTree rebuilt(w);
    for (std::size_t pos = 1; pos < 2 * tree.capacity(); ++pos) {
      const double a = tree.node(pos);
      const double b = rebuilt.node(pos);
      const double rel = std::abs(a - b) / std::max(std::abs(b), 1e-300);
      if (a != b) worst = std::max(worst, rel);
    }
  }
  r.passed = worst <= 1e-9;
  r.metrics["max_rel_error"] = worst;
  r.detail = format("max relative node error = ", worst);
  return r;
}

CheckResult check_rejection_iterations(std::uint64_t seed) {
  CheckResult r{"rejection_geometric_mean", false, {}, {}};
  Rng rng(seed);
  constexpr std::size_t n = 50;
  std::vector<double> w(n);
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = uniform01(rng) + 0.1;
    target[i] = w[i] * (1.0 + uniform01(rng));
  }
  const SamplerTree tree(w);
  const double frob = std::accumulate(w.begin(), w.end(), 0.0);
  const NormProposal proposal(&tree, frob, 0.0, n);
  constexpr double kBound = 2.0;
  constexpr std::size_t kRuns = 100000;
  double total_iters = 0.0;
  for (std::size_t run = 0; run < kRuns; ++run) {
    total_iters += static_cast<double>(
        reject_sample(target, proposal, kBound, std::numeric_limits<std::size_t>::max(), rng)
            .iterations);
  }
  const double mean = total_iters / kRuns;
  r.passed = std::abs(mean - kBound) <= 0.05 * kBound;
  r.metrics["mean_iterations"] = mean;
  r.detail = format("mean iterations = ", mean) + " (expected 2)";
  return r;
}

CheckResult check_oversampling(std::uint64_t seed, bool broken) {
  CheckResult r{"oversampling", false, {}, {}};
  std::size_t violations = 0;
  std::size_t checked = 0;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    const Dataset ds = blob_instance(150, 3, derive_seed(seed, 100, inst));
    const std::size_t n = ds.size();
    RejectionConfig cfg;
    cfg.chain_length = 30;
    cfg.seed = derive_seed(seed, 101, inst);
    qkmeans(ds, 12, cfg, [&](const StepInfo& step) {
      const std::vector<double> costs = point_costs(ds, step.before);
      const double total = std::accumulate(costs.begin(), costs.end(), 0.0);
      if (!(total > 0.0)) return;
      const auto c1 = ds.row(step.before[0]);
      const double c1n = simd::squared_norm(c1);
      const double norm_total = ds.frob_sq() + static_cast<double>(n) * c1n;
      const double tau = broken ? 0.5 : 2.0 * norm_total / total;
      for (std::size_t x = 0; x < n; ++x) {
        const double pi = costs[x] / total;
        const double kappa = (simd::squared_norm(ds.row(x)) + c1n) / norm_total;
        ++checked;
        if (pi > tau * kappa * (1.0 + 1e-12)) ++violations;
      }
    });
  }
  r.passed = violations == 0;
  r.metrics["violations"] = static_cast<double>(violations);
  r.metrics["checked"] = static_cast<double>(checked);
  r.detail = std::to_string(violations) + " violations over " + std::to_string(checked) + " masses";
  return r;
}

CheckResult check_tv_distance(std::uint64_t seed) {
  CheckResult r{"rejection_tv_distance", false, {}, {}};
  const Dataset ds = preprocess(gen_gaussian_mixture(10, 2, 3, 2.0, derive_seed(seed, 200)));
  const std::size_t c1 = 0;
  const std::vector<std::size_t> first{c1};
  const std::vector<double> costs = point_costs(ds, first);
  const double total = std::accumulate(costs.begin(), costs.end(), 0.0);
  std::vector<double> counts(ds.size(), 0.0);
  constexpr std::size_t kRuns = 100000;
  RejectionConfig cfg;
  cfg.first_center = c1;
  for (std::size_t run = 0; run < kRuns; ++run) {
    cfg.seed = derive_seed(seed, 201, run);
    counts[qkmeans(ds, 2, cfg).center_indices[1]] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) tv += std::abs(counts[i] / kRuns - costs[i] / total);
  tv *= 0.5;
  r.passed = tv <= 0.02;
  r.metrics["tv"] = tv;
  r.detail = format("total variation = ", tv);
  return r;
}

CheckResult check_fallback_rate(std::uint64_t seed) {
  CheckResult r{"fallback_rate", false, {}, {}};
  const Dataset ds = blob_instance(300, 4, derive_seed(seed, 300));
  constexpr std::size_t kM = 1;
  constexpr std::size_t kK = 20;
  double expected = 0.0;
  double variance = 0.0;
  std::size_t fallbacks = 0;
  std::size_t steps = 0;
  for (std::uint64_t run = 0; steps < 3000; ++run) {
    RejectionConfig cfg;
    cfg.chain_length = kM;
    cfg.seed = derive_seed(seed, 301, run);
    qkmeans(ds, kK, cfg, [&](const StepInfo& step) {
      if (step.zero_cost) return;
      const std::vector<double> costs = point_costs(ds, step.before);
      const double total = std::accumulate(costs.begin(), costs.end(), 0.0);
      const double c1n = simd::squared_norm(ds.row(step.before[0]));
      const double tau = 2.0 * (ds.frob_sq() + static_cast<double>(ds.size()) * c1n) / total;
      const double bound = std::exp(-static_cast<double>(kM) * std::log(static_cast<double>(kK)) / tau);
      expected += bound;
      variance += bound * (1.0 - bound);
      fallbacks += step.fell_back ? 1 : 0;
      ++steps;
    });
  }
  const double limit = expected + 3.0 * std::sqrt(variance);
  r.passed = static_cast<double>(fallbacks) <= limit;
  r.metrics["fallbacks"] = static_cast<double>(fallbacks);
  r.metrics["limit"] = limit;
  r.metrics["steps"] = static_cast<double>(steps);
  r.detail = std::to_string(fallbacks) + " fallbacks, limit " + std::to_string(limit);
  return r;
}

CheckResult check_ann_sandwich(std::uint64_t seed) {
  CheckResult r{"ann_sandwich", false, {}, {}};
  constexpr double kRho = 0.25;
  std::size_t violations = 0;
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    const Dataset pts = gen_gaussian_mixture(400, 8, 6, 2.0, derive_seed(seed, 400, inst));
    auto index = make_ann_index(AnnBackend::lsh, kRho, derive_seed(seed, 401, inst));
    auto oracle = make_ann_index(AnnBackend::exact, 1.0, 0);
    for (std::size_t i = 0; i < 200; ++i) {
      index->insert(pts.row(i));
      oracle->insert(pts.row(i));
    }
    for (std::size_t i = 200; i < 400; ++i) {
      const double got = index->query(pts.row(i)).dist_sq;
      const double truth = oracle->query(pts.row(i)).dist_sq;
      if (got < truth || got > truth / kRho * (1.0 + 1e-12)) ++violations;
    }
  }
  r.passed = violations == 0;
  r.metrics["violations"] = static_cast<double>(violations);
  r.detail = std::to_string(violations) + " contract violations";
  return r;
}

CheckResult check_ann_monotone(std::uint64_t seed) {
  CheckResult r{"ann_monotone", true, {}, {}};
  const Dataset pts = gen_gaussian_mixture(300, 6, 4, 2.0, derive_seed(seed, 500));
  for (const AnnBackend backend : {AnnBackend::exact, AnnBackend::lsh}) {
    auto index = make_ann_index(backend, 0.5, derive_seed(seed, 501));
    const auto probe = pts.row(0);
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < pts.size(); ++i) {
      index->insert(pts.row(i));
      const double d = index->query_row(0, probe).dist_sq;
      if (d > last) r.passed = false;
      last = d;
    }
  }
  r.detail = r.passed ? "non-increasing" : "distance increased after an insertion";
  return r;
}

CheckResult check_rho_delta_consistency(std::uint64_t seed) {
  CheckResult r{"rho_delta_consistency", false, {}, {}};
  double worst = 0.0;
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    const Dataset ds = blob_instance(60, 3, derive_seed(seed, 600, inst));
    kmeanspp_exact(ds, 8, derive_seed(seed, 601, inst),
                   [&](std::span<const std::size_t> centers, std::span<const double> masses) {
                     const std::vector<double> costs = point_costs(ds, centers);
                     const std::vector<double> ref = perturbed_d2_masses(costs, 0.0);
                     for (std::size_t i = 0; i < masses.size(); ++i) {
                       worst = std::max(worst, std::abs(ref[i] - masses[i]));
                     }
                   });
  }
  r.passed = worst <= 1e-12;
  r.metrics["max_abs_error"] = worst;
  r.detail = format("max |mass difference| = ", worst);
  return r;
}

CheckResult check_centering(std::uint64_t seed) {
  CheckResult r{"centering", false, {}, {}};
  Rng rng(seed);
  std::vector<double> raw(500 * 4);
  for (double& x : raw) x = 100.0 + 10.0 * uniform01(rng);
  const Dataset ds = preprocess(Dataset(raw, 500, 4));
  double worst_mean = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) m += ds.row(i)[j];
    worst_mean = std::max(worst_mean, std::abs(m / ds.size()));
  }
  const PointSet origin(std::vector<double>(4, 0.0), 4);
  const double rel = std::abs(cost(ds, origin) - ds.frob_sq()) / ds.frob_sq();
  r.passed = worst_mean <= 1e-9 * 110.0 && rel <= 1e-9;
  r.metrics["max_mean"] = worst_mean;
  r.metrics["frob_rel_error"] = rel;
  r.detail = format("max |mean| = ", worst_mean);
  return r;
}

CheckResult check_power_law(std::uint64_t) {
  CheckResult r{"power_law_recovery", false, {}, {}};
  std::vector<double> ks;
  std::vector<double> values;
  for (double k = 4; k <= 1024; k *= 2) {
    ks.push_back(k);
    values.push_back(3.0 * std::pow(k, 0.7));
  }
  const PowerLawFit fit = fit_power_law(ks, values);
  r.passed = std::abs(fit.slope - 0.7) <= 1e-3 && std::abs(fit.intercept - std::log(3.0)) <= 1e-3;
  r.metrics["slope"] = fit.slope;
  r.detail = format("slope = ", fit.slope);
  return r;
}

}  // namespace

std::vector<CheckResult> run_validation(const ValidationOptions& options) {
  const std::uint64_t s = options.seed;
  std::vector<CheckResult> results;
  results.push_back(check_sampler_chi_square(derive_seed(s, 1)));
  results.push_back(check_sampler_rebuild(derive_seed(s, 2)));
  results.push_back(check_rejection_iterations(derive_seed(s, 3)));
  results.push_back(check_oversampling(derive_seed(s, 4), options.break_oversampling));
  results.push_back(check_tv_distance(derive_seed(s, 5)));
  results.push_back(check_fallback_rate(derive_seed(s, 6)));
  results.push_back(check_ann_sandwich(derive_seed(s, 7)));
  results.push_back(check_ann_monotone(derive_seed(s, 8)));
  results.push_back(check_rho_delta_consistency(derive_seed(s, 9)));
  results.push_back(check_centering(derive_seed(s, 10)));
  results.push_back(check_power_law(derive_seed(s, 11)));
  return results;
}

}  // namespace qkm
