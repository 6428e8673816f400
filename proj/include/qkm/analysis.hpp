#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qkm/dataset.hpp"

namespace qkm {

struct Assignment {
  std::vector<std::size_t> labels;   // nearest center, ties to the lowest ordinal
  std::vector<double> dist_sq;       // per-point cost contribution
  double cost = 0.0;
};

/// Throws std::invalid_argument on an empty center set or a dimension mismatch.
Assignment assign(const Dataset& ds, const PointSet& centers);
double cost(const Dataset& ds, const PointSet& centers);

PointSet gather_rows(const Dataset& ds, std::span<const std::size_t> rows);

struct LloydResult {
  PointSet centers;
  std::vector<double> cost_trace;  // cost of the start centers first; non-increasing
};

/// Lloyd iterations until the relative improvement drops below `tol`, the
/// centers stop moving, or `max_iters` updates were made. An empty cluster is
/// moved onto the point with the largest current cost contribution.
LloydResult lloyd(const Dataset& ds, PointSet centers, std::size_t max_iters, double tol);

struct GeomParams {
  double beta = 0.0;                 // +inf when cost(X, C) == 0
  double eta_centers = 0.0;          // +inf when two centers coincide
  std::optional<double> eta_data;    // +inf when the data has duplicates
  bool eta_data_subsampled = false;
};

/// Max over min pairwise distance; throws std::invalid_argument for < 2 points.
double aspect_ratio(const PointSet& points);

/// Rows beyond `cap` are subsampled with `seed`; the flag reports it.
std::pair<double, bool> eta_data(const Dataset& ds, std::size_t cap = 20000,
                                 std::uint64_t seed = 0);

/// Requires a centered dataset and >= 2 centers.
GeomParams geom_params(const Dataset& ds, const PointSet& centers, bool with_eta_data = false);

/// max_x log(mu(x) / nu(x)) over supp(mu); +inf when mu(x) > 0 == nu(x).
/// Throws std::invalid_argument for unnormalized or mismatched inputs.
double max_renyi(std::span<const double> mu, std::span<const double> nu);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> ci95_slope{0.0, 0.0};
  std::size_t points_used = 0;
};

/// OLS of ln(values) on ln(ks); 95% slope interval from Student's t with
/// points - 2 degrees of freedom. Zero variance of ln(values) yields R^2 = 0.
PowerLawFit fit_power_law(std::span<const double> ks, std::span<const double> values);

/// Maximum-likelihood intrinsic dimension from log ratios of k-NN distances,
/// averaged over the evaluated points (exhaustive k-NN). Points whose
/// neighbour window contains a zero distance are skipped.
double mle_id(const Dataset& ds, std::size_t k_nn, std::optional<std::size_t> subsample = {},
              std::uint64_t seed = 0);

struct BetaCurvePoint {
  std::size_t k = 0;
  std::size_t runs = 0;
  double mean_beta = 0.0;
  double mean_eta = 0.0;         // post-Lloyd centers
  double mean_eta_seeded = 0.0;  // k-means++ centers before Lloyd
  double best_beta = 0.0;        // run with the lowest final cost
  double best_eta = 0.0;
};

struct BetaCurve {
  std::vector<BetaCurvePoint> points;
  std::vector<std::size_t> skipped_ks;  // k = 1 has no eta
};

/// runs x (k-means++ -> Lloyd) per k, fanned out over `threads` workers.
/// Results do not depend on the thread count.
BetaCurve beta_curve(const Dataset& ds, std::span<const std::size_t> ks, std::size_t runs,
                     std::size_t lloyd_iters, std::uint64_t seed, std::size_t threads = 1,
                     double lloyd_tol = 1e-4);

}  // namespace qkm
