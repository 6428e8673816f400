#include "qkm/analysis.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qkm/error.hpp"
#include "qkm/kernels.hpp"
#include "qkm/parallel.hpp"
#include "qkm/random.hpp"
#include "qkm/seeding.hpp"

namespace qkm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_centers(const Dataset& ds, const PointSet& centers) {
  if (centers.empty()) throw std::invalid_argument("center set is empty");
  if (centers.dim() != ds.dim()) throw std::invalid_argument("center dimension mismatch");
}

PointSet centroids(const Dataset& ds, const Assignment& a, std::size_t k,
                   std::vector<std::size_t>& counts) {
  const std::size_t dim = ds.dim();
  std::vector<double> sums(k * dim, 0.0);
  counts.assign(k, 0);
  const auto& kern = simd::kernels();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    kern.axpy(1.0, ds.row(i).data(), sums.data() + a.labels[i] * dim, dim);
    ++counts[a.labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] /= static_cast<double>(counts[c]);
  }
  return PointSet(std::move(sums), dim);
}

}  // namespace

Assignment assign(const Dataset& ds, const PointSet& centers) {
  check_centers(ds, centers);
  const auto& kern = simd::kernels();
  Assignment a;
  a.labels.resize(ds.size());
  a.dist_sq.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto hit = kern.nearest(ds.row(i).data(), centers.data().data(), centers.size(), ds.dim());
    a.labels[i] = hit.index;
    a.dist_sq[i] = hit.dist_sq;
    a.cost += hit.dist_sq;
  }
  return a;
}

double cost(const Dataset& ds, const PointSet& centers) { return assign(ds, centers).cost; }

PointSet gather_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  PointSet out(ds.dim());
  for (const std::size_t r : rows) {
    if (r >= ds.size()) throw std::out_of_range("row index out of range");
    out.push_back(ds.row(r));
  }
  return out;
}

LloydResult lloyd(const Dataset& ds, PointSet centers, std::size_t max_iters, double tol) {
  check_centers(ds, centers);
  const std::size_t k = centers.size();
  Assignment current = assign(ds, centers);
  LloydResult result;
  result.cost_trace.push_back(current.cost);
  std::vector<std::size_t> counts;

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    PointSet next = centroids(ds, current, k, counts);
    std::vector<std::size_t> empty;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) empty.push_back(c);
    }
    if (!empty.empty()) {
      std::vector<std::size_t> order(ds.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(empty.size()),
                        order.end(), [&](std::size_t a, std::size_t b) {
                          return current.dist_sq[a] > current.dist_sq[b] ||
                                 (current.dist_sq[a] == current.dist_sq[b] && a < b);
                        });
      for (std::size_t e = 0; e < empty.size(); ++e) {
        const auto src = ds.row(order[e]);
        std::copy(src.begin(), src.end(), next.row(empty[e]).begin());
      }
    }
    if (next == centers) break;
    Assignment updated = assign(ds, next);
    const double previous = result.cost_trace.back();
    // Rounding in the centroid update can make a converged step look worse.
    if (updated.cost > previous) break;
    centers = std::move(next);
    current = std::move(updated);
    result.cost_trace.push_back(current.cost);
    if (previous <= 0.0 || (previous - current.cost) / previous < tol) break;
  }
  result.centers = std::move(centers);
  return result;
}

double aspect_ratio(const PointSet& points) {
  if (points.size() < 2) throw std::invalid_argument("aspect ratio needs at least two points");
  const auto& kern = simd::kernels();
  double lo = kInf;
  double hi = 0.0;
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      const double d = kern.squared_distance(points.row(a).data(), points.row(b).data(), points.dim());
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (lo <= 0.0) return kInf;
  return std::sqrt(hi / lo);
}

std::pair<double, bool> eta_data(const Dataset& ds, std::size_t cap, std::uint64_t seed) {
  if (ds.size() < 2) throw std::invalid_argument("eta(X) needs at least two rows");
  const bool subsampled = ds.size() > cap;
  const Dataset sample = subsampled ? subsample_rows(ds, cap, seed) : ds;
  const std::vector<double> coords(sample.data().begin(), sample.data().end());
  return {aspect_ratio(PointSet(coords, sample.dim())), subsampled};
}

GeomParams geom_params(const Dataset& ds, const PointSet& centers, bool with_eta_data) {
  if (!ds.centered()) throw std::invalid_argument("geom_params requires a centered dataset");
  check_centers(ds, centers);
  GeomParams g;
  const double c = cost(ds, centers);
  g.beta = c > 0.0 ? ds.frob_sq() / c : kInf;
  g.eta_centers = aspect_ratio(centers);
  if (with_eta_data) {
    const auto [eta, subsampled] = eta_data(ds);
    g.eta_data = eta;
    g.eta_data_subsampled = subsampled;
  }
  return g;
}

double max_renyi(std::span<const double> mu, std::span<const double> nu) {
  if (mu.size() != nu.size() || mu.empty()) {
    throw std::invalid_argument("distributions must share a nonempty support");
  }
  for (const auto dist : {mu, nu}) {
    double total = 0.0;
    for (const double p : dist) {
      if (!(p >= 0.0)) throw std::invalid_argument("probabilities must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("distribution is not normalized");
  }
  double divergence = -kInf;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] <= 0.0) continue;
    if (nu[i] <= 0.0) return kInf;
    divergence = std::max(divergence, std::log(mu[i] / nu[i]));
  }
  return divergence;
}

PowerLawFit fit_power_law(std::span<const double> ks, std::span<const double> values) {
  if (ks.size() != values.size()) throw std::invalid_argument("ks and values differ in length");
  const std::size_t n = ks.size();
  if (n < 3) throw std::invalid_argument("power-law fit needs at least 3 points");
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ks[i] > 0.0) || !std::isfinite(ks[i])) throw std::invalid_argument("k must be positive");
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw std::invalid_argument("power-law values must be positive and finite");
    }
    x[i] = std::log(ks[i]);
    y[i] = std::log(values[i]);
  }
  const double x_mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - x_mean) * (x[i] - x_mean);
    sxy += (x[i] - x_mean) * (y[i] - y_mean);
    syy += (y[i] - y_mean) * (y[i] - y_mean);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("power-law fit needs at least two distinct k");

  PowerLawFit fit;
  fit.points_used = n;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  if (syy > 0.0) {
    fit.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
    const double se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    const boost::math::students_t t_dist(static_cast<double>(n - 2));
    const double t = boost::math::quantile(boost::math::complement(t_dist, 0.025));
    fit.ci95_slope = {fit.slope - t * se, fit.slope + t * se};
  } else {
    fit.r_squared = 0.0;
    fit.ci95_slope = {fit.slope, fit.slope};
  }
  return fit;
}

double mle_id(const Dataset& ds, std::size_t k_nn, std::optional<std::size_t> subsample,
              std::uint64_t seed) {
  if (k_nn < 2) throw std::invalid_argument("k_nn must be at least 2");
  const bool use_sample = subsample && *subsample < ds.size();
  const Dataset data = use_sample ? subsample_rows(ds, *subsample, seed) : ds;
  const std::size_t n = data.size();
  if (n <= k_nn) throw std::invalid_argument("mle_id needs n > k_nn");

  const auto& kern = simd::kernels();
  std::vector<double> dist(n);
  std::vector<double> window(k_nn);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    kern.squared_distances(data.row(i).data(), data.data().data(), n, data.dim(), dist.data());
    // Sorted k smallest squared distances to other points.
    std::size_t filled = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = dist[j];
      if (filled == k_nn && d >= window[k_nn - 1]) continue;
      std::size_t pos = filled < k_nn ? filled++ : k_nn - 1;
      while (pos > 0 && window[pos - 1] > d) {
        window[pos] = window[pos - 1];
        --pos;
      }
      window[pos] = d;
    }
    if (window[0] <= 0.0) continue;
    double log_sum = 0.0;
    for (std::size_t j = 0; j + 1 < k_nn; ++j) log_sum += 0.5 * std::log(window[k_nn - 1] / window[j]);
    if (!(log_sum > 0.0)) continue;
    sum += static_cast<double>(k_nn - 1) / log_sum;
    ++used;
  }
  if (used == 0) throw DegenerateError("every point has a zero-distance neighbour window");
  return sum / static_cast<double>(used);
}

BetaCurve beta_curve(const Dataset& ds, std::span<const std::size_t> ks, std::size_t runs,
                     std::size_t lloyd_iters, std::uint64_t seed, std::size_t threads,
                     double lloyd_tol) {
  if (!ds.centered()) throw std::invalid_argument("beta_curve requires a centered dataset");
  if (runs == 0) throw std::invalid_argument("runs must be at least 1");
  BetaCurve curve;
  std::vector<std::size_t> usable;
  for (const std::size_t k : ks) {
    if (k > ds.size()) throw std::invalid_argument("k exceeds the number of rows");
    if (k < 2) {
      std::cerr << "warning: k = " << k << " has no eta; skipped\n";
      curve.skipped_ks.push_back(k);
      continue;
    }
    usable.push_back(k);
  }

  struct RunStats {
    double beta;
    double eta;
    double eta_seeded;
    double cost;
  };
  std::vector<RunStats> stats(usable.size() * runs);
  parallel_for(stats.size(), threads, [&](std::size_t task) {
    const std::size_t k = usable[task / runs];
    const std::size_t run = task % runs;
    const SeedingResult seeded = kmeanspp_exact(ds, k, derive_seed(seed, stream::kRun, k * 1000003 + run));
    const LloydResult refined = lloyd(ds, seeded.center_coords, lloyd_iters, lloyd_tol);
    const double final_cost = refined.cost_trace.back();
    stats[task] = {final_cost > 0.0 ? ds.frob_sq() / final_cost : kInf, aspect_ratio(refined.centers),
                   aspect_ratio(seeded.center_coords), final_cost};
  });

  for (std::size_t i = 0; i < usable.size(); ++i) {
    BetaCurvePoint p;
    p.k = usable[i];
    p.runs = runs;
    std::size_t best = 0;
    for (std::size_t r = 0; r < runs; ++r) {
      const RunStats& s = stats[i * runs + r];
      p.mean_beta += s.beta / static_cast<double>(runs);
      p.mean_eta += s.eta / static_cast<double>(runs);
      p.mean_eta_seeded += s.eta_seeded / static_cast<double>(runs);
      if (s.cost < stats[i * runs + best].cost) best = r;
    }
    p.best_beta = stats[i * runs + best].beta;
    p.best_eta = stats[i * runs + best].eta;
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace qkm
