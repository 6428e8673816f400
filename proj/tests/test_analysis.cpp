#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "qkm/analysis.hpp"
#include "qkm/error.hpp"
#include "qkm/seeding.hpp"

using namespace qkm;

namespace {

const Dataset& line4() {
  static const Dataset ds = oracle::from_rows({{0}, {1}, {10}, {11}});
  return ds;
}

PointSet points1d(std::initializer_list<double> xs) { return PointSet(std::vector<double>(xs), 1); }

}  // namespace

TEST_CASE("cost and assignment") {
  CHECK(cost(line4(), points1d({0.5, 10.5})) == doctest::Approx(1.0));
  CHECK(cost(line4(), points1d({0, 1, 10, 11})) == 0.0);
  const Dataset centered = preprocess(line4());
  CHECK(cost(centered, points1d({0.0})) == doctest::Approx(centered.frob_sq()));
  const Assignment a = assign(line4(), points1d({0.5, 10.5}));
  CHECK(a.labels == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(a.dist_sq[2] == doctest::Approx(0.25));
  CHECK(assign(line4(), points1d({0, 1})).labels[0] == 0);
}

TEST_CASE("lloyd") {
  const LloydResult fixed = lloyd(line4(), points1d({0.5, 10.5}), 10, 0.0);
  CHECK(fixed.cost_trace.size() == 1);
  CHECK(fixed.centers == points1d({0.5, 10.5}));

  const LloydResult r = lloyd(line4(), points1d({1, 10}), 10, 0.0);
  CHECK(r.centers.row(0)[0] == doctest::Approx(0.5));
  CHECK(r.centers.row(1)[0] == doctest::Approx(10.5));
  CHECK(r.cost_trace[1] == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 20 + rng() % 60;
    const std::size_t dim = 1 + rng() % 4;
    std::vector<double> v(n * dim);
    for (double& x : v) x = normal(rng);
    const Dataset ds(std::move(v), n, dim);
    const std::size_t k = 1 + rng() % 8;
    const SeedingResult seeds = uniform_seeding(ds, k, rng());
    const LloydResult lr = lloyd(ds, seeds.center_coords, 50, 0.0);
    for (std::size_t i = 1; i < lr.cost_trace.size(); ++i) {
      CHECK(lr.cost_trace[i] <= lr.cost_trace[i - 1] * (1.0 + 1e-12));
    }
    CHECK(lr.cost_trace.back() == doctest::Approx(cost(ds, lr.centers)));
  }
}

TEST_CASE("beta and eta") {
  const Dataset ds = preprocess(line4());
  CHECK(ds.frob_sq() == doctest::Approx(101.0));
  CHECK(oracle::optimal_cost(ds, 2) == doctest::Approx(1.0));
  const GeomParams g = geom_params(ds, points1d({-5.0, 5.0}));
  CHECK(g.beta == doctest::Approx(101.0));
  CHECK(aspect_ratio(points1d({0, 3, 9})) == doctest::Approx(3.0));
  CHECK(std::isinf(aspect_ratio(points1d({2, 2}))));
  CHECK_THROWS_AS(aspect_ratio(points1d({2})), std::invalid_argument);
  CHECK_THROWS_AS(geom_params(line4(), points1d({0, 1})), std::invalid_argument);

  const GeomParams zero = geom_params(ds, PointSet(std::vector<double>(ds.data().begin(), ds.data().end()), 1));
  CHECK(std::isinf(zero.beta));

  const GeomParams with_data = geom_params(ds, points1d({-5.0, 5.0}), true);
  REQUIRE(with_data.eta_data.has_value());
  CHECK(*with_data.eta_data == doctest::Approx(11.0));
}

TEST_CASE("beta_k against brute-force optimum on tiny instances") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(-1, 1);
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<double> v(8 * 2);
    for (double& x : v) x = unif(rng);
    const Dataset ds = preprocess(Dataset(std::move(v), 8, 2));
    for (std::size_t k = 2; k <= 3; ++k) {
      const double opt = oracle::optimal_cost(ds, k);
      const SeedingResult s = kmeanspp_exact(ds, k, rng());
      const double beta = geom_params(ds, lloyd(ds, s.center_coords, 100, 0.0).centers).beta;
      // Any centers cost at least the optimum, and never more than the centroid.
      CHECK(beta >= 1.0 - 1e-12);
      CHECK(beta <= ds.frob_sq() / opt * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("max Renyi divergence") {
  const std::vector<double> mu{0.5, 0.5};
  CHECK(max_renyi(mu, mu) == 0.0);
  CHECK(max_renyi(mu, std::vector<double>{0.25, 0.75}) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(max_renyi(mu, std::vector<double>{1.0, 0.0})));
  CHECK_THROWS_AS(max_renyi(mu, std::vector<double>{0.5, 0.6}), std::invalid_argument);
}

TEST_CASE("tight oversampling constant stays below tau") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  for (int inst = 0; inst < 30; ++inst) {
    const std::size_t n = 5 + rng() % 20;
    std::vector<double> v(n * 2);
    for (double& x : v) x = normal(rng);
    const Dataset ds = preprocess(Dataset(std::move(v), n, 2));
    const std::size_t c1 = rng() % n;
    std::vector<std::size_t> centers{c1};
    const double c1_sq = oracle::dist_sq(ds.row(c1), std::vector<double>(2, 0.0));
    for (std::size_t step = 0; step < 3; ++step) {
      const auto pi = oracle::d2_law(ds, centers);
      double cost_total = 0.0;
      for (std::size_t i = 0; i < n; ++i) cost_total += oracle::min_dist_sq(ds, i, centers);
      if (cost_total <= 0.0) break;
      std::vector<double> kappa(n);
      const double z = ds.frob_sq() + static_cast<double>(n) * c1_sq;
      for (std::size_t i = 0; i < n; ++i) {
        kappa[i] = (oracle::dist_sq(ds.row(i), std::vector<double>(2, 0.0)) + c1_sq) / z;
      }
      const double tau = 2.0 * z / cost_total;
      CHECK(std::exp(max_renyi(pi, kappa)) <= tau * (1.0 + 1e-12));
      centers.push_back(rng() % n);
    }
  }
}

TEST_CASE("power-law fits") {
  const std::vector<double> ks{4, 8, 16, 32, 64};
  std::vector<double> exact;
  std::vector<double> flat(ks.size(), 3.0);
  std::vector<double> noisy;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> jitter(-1e-6, 1e-6);
  for (const double k : ks) {
    exact.push_back(std::sqrt(k));
    noisy.push_back(2.0 * std::pow(k, 1.5) * (1.0 + jitter(rng)));
  }
  const PowerLawFit a = fit_power_law(ks, exact);
  CHECK(a.slope == doctest::Approx(0.5));
  CHECK(a.r_squared == doctest::Approx(1.0));
  const PowerLawFit b = fit_power_law(ks, flat);
  CHECK(b.slope == doctest::Approx(0.0));
  CHECK(b.r_squared == 0.0);
  const PowerLawFit c = fit_power_law(ks, noisy);
  CHECK(std::abs(c.slope - 1.5) <= 1e-3);
  CHECK(std::abs(c.intercept - std::log(2.0)) <= 1e-3);
  CHECK(c.ci95_slope.first <= c.slope);
  CHECK(c.ci95_slope.second >= c.slope);
  CHECK_THROWS_AS(fit_power_law(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                  std::invalid_argument);
}

TEST_CASE("MLE intrinsic dimension") {
  const Dataset hand = oracle::from_rows({{0}, {1}, {3}});
  const double expected = (1.0 / std::log(3.0) + 1.0 / std::log(2.0) + 1.0 / std::log(1.5)) / 3.0;
  CHECK(std::abs(mle_id(hand, 2) - expected) <= 1e-12);
  CHECK(std::abs(mle_id(hand, 2) - 1.6064) <= 1e-4);
  CHECK_THROWS_AS(mle_id(hand, 1), std::invalid_argument);
  CHECK_THROWS_AS(mle_id(hand, 3), std::invalid_argument);
  CHECK_THROWS_AS(mle_id(oracle::from_rows({{1, 1}, {1, 1}, {1, 1}, {1, 1}}), 2), DegenerateError);

  SyntheticSpec spec;
  spec.intrinsic_dim = 1;
  spec.ambient_dim = 20;
  spec.n = 10000;
  spec.seed = 4;
  const double line = mle_id(gen_manifold(spec), 20);
  CHECK(line >= 0.8);
  CHECK(line <= 1.2);

  spec.intrinsic_dim = 5;
  spec.ambient_dim = 5;
  const double cube5 = mle_id(gen_manifold(spec), 20);
  CHECK(cube5 >= 4.0);
  CHECK(cube5 <= 6.0);
}

TEST_CASE("beta curve on a square") {
  SyntheticSpec spec;
  spec.intrinsic_dim = 2;
  spec.ambient_dim = 20;
  spec.n = 20000;
  spec.seed = 12;
  const Dataset ds = preprocess(gen_manifold(spec));
  const std::vector<std::size_t> ks{1, 4, 8, 16, 32, 64, 128, 256};
  const BetaCurve curve = beta_curve(ds, ks, 2, 20, 5);
  CHECK(curve.skipped_ks == std::vector<std::size_t>{1});
  REQUIRE(curve.points.size() == 7);
  std::vector<double> kv;
  std::vector<double> beta;
  for (const auto& p : curve.points) {
    CHECK(p.mean_beta >= 1.0);
    kv.push_back(static_cast<double>(p.k));
    beta.push_back(p.mean_beta);
  }
  const PowerLawFit fit = fit_power_law(kv, beta);
  CHECK(std::abs(fit.slope - 1.0) <= 0.25);
  CHECK(fit.r_squared >= 0.9);
  CHECK_THROWS_AS(beta_curve(line4(), ks, 1, 1, 1), std::invalid_argument);
}
