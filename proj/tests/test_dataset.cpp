#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unistd.h>

#include "doctest.h"
#include "oracles.hpp"
#include "qkm/analysis.hpp"
#include "qkm/dataset.hpp"
#include "qkm/error.hpp"
#include "qkm/seeding.hpp"

using namespace qkm;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("qkm_test_" + std::to_string(::getpid()) + "_" + name);
}

double column_variance(const Dataset& ds) {
  double s = 0.0;
  for (const double v : ds.data()) s += v * v;
  return s / static_cast<double>(ds.size() * ds.dim());
}

}  // namespace

TEST_CASE("CSV parsing") {
  const Dataset ds = parse_csv("0,0\n1,1");
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 2);
  CHECK(ds.row(1)[0] == 1.0);
  CHECK_FALSE(ds.centered());

  try {
    parse_csv("0,0\n1");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(std::string(e.what()).find("ragged row 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv(""), EmptyDatasetError);
  CHECK_THROWS_AS(parse_csv("1,abc\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("1,nan\n"), ParseError);
  CHECK(parse_csv("1.5, -2\n\n3,4\n").size() == 2);
}

TEST_CASE("binary roundtrip is exact for float-representable data") {
  const Dataset csv = parse_csv("0.5,-1.25\n3,4\n-0.125,8\n");
  const auto bin = temp_path("roundtrip.bin");
  save_dataset(csv, bin, FileFormat::bin);
  const Dataset back = load_dataset(bin, FileFormat::bin);
  CHECK(back.size() == csv.size());
  CHECK(back.dim() == csv.dim());
  for (std::size_t i = 0; i < csv.data().size(); ++i) CHECK(back.data()[i] == csv.data()[i]);

  const auto text = temp_path("roundtrip.csv");
  save_dataset(csv, text, FileFormat::csv);
  const Dataset back_csv = load_dataset(text, FileFormat::csv);
  for (std::size_t i = 0; i < csv.data().size(); ++i) CHECK(back_csv.data()[i] == csv.data()[i]);
  fs::remove(bin);
  fs::remove(text);
}

TEST_CASE("loading errors") {
  CHECK_THROWS_AS(load_dataset(temp_path("missing.bin"), FileFormat::bin), IoError);
  const auto bad = temp_path("bad.bin");
  {
    std::ofstream f(bad, std::ios::binary);
    f << "NOPE";
  }
  CHECK_THROWS(load_dataset(bad, FileFormat::bin));
  fs::remove(bad);
  CHECK(format_from_path("x.csv") == FileFormat::csv);
  CHECK(format_from_path("x.bin") == FileFormat::bin);
}

TEST_CASE("preprocess centers the data") {
  const Dataset ds = preprocess(parse_csv("0\n1\n2\n"));
  CHECK(ds.centered());
  CHECK(ds.row(0)[0] == -1.0);
  CHECK(ds.row(1)[0] == 0.0);
  CHECK(ds.row(2)[0] == 1.0);
  CHECK(ds.frob_sq() == 2.0);

  const Dataset again = preprocess(ds);
  for (std::size_t i = 0; i < ds.data().size(); ++i) CHECK(again.data()[i] == ds.data()[i]);

  // A target dimension at least the input dimension skips the projection.
  const Dataset jl = preprocess(parse_csv("0\n1\n2\n"), JlOptions{0.2, 2, 1});
  CHECK(jl.dim() == 1);
  CHECK(jl.frob_sq() == 2.0);
}

TEST_CASE("JL target dimension and cost preservation") {
  CHECK(jl_target_dim(0.2, 10) ==
        static_cast<std::size_t>(std::ceil(8.0 * std::log(10.0 / 0.2) / 0.04)));
  CHECK_THROWS_AS(jl_target_dim(0.25, 10), std::invalid_argument);
  CHECK_THROWS_AS(jl_target_dim(0.0, 10), std::invalid_argument);

  // Wide data: the projection must keep clustering costs within 1 +- eps.
  const Dataset raw = gen_gaussian_mixture(300, 2000, 5, 4.0, 9);
  const Dataset base = preprocess(raw);
  const double eps = 0.2;
  const Dataset projected = preprocess(raw, JlOptions{eps, 5, 4});
  CHECK(projected.dim() == jl_target_dim(eps, 5));
  CHECK(projected.dim() < base.dim());
  const SeedingResult seeds = kmeanspp_exact(base, 5, 3);
  const double full = cost(base, gather_rows(base, seeds.center_indices));
  const double low = cost(projected, gather_rows(projected, seeds.center_indices));
  CHECK(low >= (1.0 - eps) * full);
  CHECK(low <= (1.0 + eps) * full);
}

TEST_CASE("synthetic manifolds") {
  SyntheticSpec spec;
  spec.intrinsic_dim = 1;
  spec.ambient_dim = 1;
  spec.n = 3;
  const Dataset tiny = gen_manifold(spec);
  CHECK(tiny.size() == 3);
  for (const double v : tiny.data()) CHECK((v >= 0.0 && v <= 1.0));

  spec.intrinsic_dim = 2;
  spec.ambient_dim = 10;
  spec.n = 500;
  spec.seed = 17;
  const Dataset plane = gen_manifold(spec);
  CHECK(plane.dim() == 10);
  Eigen::MatrixXd m(plane.size(), plane.dim());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    for (std::size_t j = 0; j < plane.dim(); ++j) m(i, j) = plane.row(i)[j];
  }
  m.rowwise() -= m.colwise().mean();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  for (Eigen::Index i = 2; i < sv.size(); ++i) CHECK(sv(i) < 1e-8 * sv(0));
  CHECK(sv(1) > 0.1 * sv(0));

  const Dataset twin = gen_manifold(spec);
  CHECK(std::equal(plane.data().begin(), plane.data().end(), twin.data().begin()));

  spec.kind = ManifoldKind::unit_sphere;
  spec.intrinsic_dim = 3;
  spec.ambient_dim = 3;
  const Dataset sphere = gen_manifold(spec);
  for (std::size_t i = 0; i < sphere.size(); ++i) {
    double s = 0.0;
    for (const double v : sphere.row(i)) s += v * v;
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("noise injection") {
  const Dataset clean = preprocess(gen_gaussian_mixture(20000, 10, 1, 0.0, 5));
  const Dataset same = inject_noise(clean, 0.0, 1);
  for (std::size_t i = 0; i < clean.data().size(); ++i) {
    CHECK(same.data()[i] == doctest::Approx(clean.data()[i]).epsilon(1e-12));
  }
  const Dataset noisy = inject_noise(clean, 1.0, 1);
  CHECK(noisy.centered());
  const double ratio = column_variance(noisy) / column_variance(clean);
  CHECK(std::abs(ratio - 2.0) <= 0.1);
  const Dataset noisy2 = inject_noise(clean, 1.0, 1);
  CHECK(std::equal(noisy.data().begin(), noisy.data().end(), noisy2.data().begin()));
  CHECK_THROWS_AS(inject_noise(clean, -1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(inject_noise(parse_csv("0\n1\n"), 1.0, 1), std::invalid_argument);
}

TEST_CASE("subsampling keeps distinct rows") {
  const Dataset ds = preprocess(parse_csv("0\n1\n2\n3\n4\n5\n6\n7\n"));
  const Dataset sub = subsample_rows(ds, 5, 3);
  CHECK(sub.size() == 5);
  CHECK(sub.centered());
  CHECK(subsample_rows(ds, 8, 3).size() == 8);
  CHECK_THROWS_AS(subsample_rows(ds, 9, 3), std::invalid_argument);
}

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(Dataset({}, 0, 2), EmptyDatasetError);
  CHECK_THROWS_AS(Dataset({1.0, 2.0, 3.0}, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(Dataset({1.0, INFINITY}, 1, 2), std::invalid_argument);
}
