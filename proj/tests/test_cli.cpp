#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cli/commands.hpp"
#include "doctest.h"
#include "json.hpp"
#include "qkm/dataset.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = qkm::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("qkm_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

json read_json(const std::string& path) {
  std::ifstream f(path);
  return json::parse(f);
}

json strip_volatile(json report) {
  report.erase("elapsed_ns");
  report["manifest"].erase("timestamp");
  return report;
}

}  // namespace

TEST_CASE("seed command") {
  TempDir dir;
  const std::string data = dir / "mix.bin";
  REQUIRE(run({"gen", "--kind", "mixture", "--n", "2000", "--D", "8", "--components", "10",
               "--seed", "3", "--out", data}).code == 0);

  const std::string out = dir / "r.json";
  const std::vector<std::string> args{"seed",  "--algo",  "qkmeans", "--k", "100", "--m",
                                      "10",    "--rho",   "0.5",     "--ann", "lsh", "--seed",
                                      "7",     "--input", data,      "--out", out};
  REQUIRE(run(args).code == 0);
  const json r = read_json(out);
  CHECK(r["center_indices"].size() == 100);
  CHECK(r["centers"].size() == 100);
  CHECK(r["per_step_proposals"].size() == 99);
  CHECK(r["final_cost"].get<double>() > 0.0);
  CHECK(r["manifest"]["command"] == "seed");
  CHECK(r["manifest"]["input_digest"].get<std::string>().size() == 16);

  REQUIRE(run(args).code == 0);
  CHECK(strip_volatile(read_json(out)) == strip_volatile(r));

  const Run stdout_run = run({"seed", "--algo", "kmeanspp", "--k", "5", "--input", data});
  CHECK(stdout_run.code == 0);
  CHECK(json::parse(stdout_run.out)["center_indices"].size() == 5);

  const Run inf = run({"seed", "--algo", "qkmeans", "--ann", "exact", "--m", "inf", "--k", "5",
                       "--input", data});
  CHECK(inf.code == 0);
}

TEST_CASE("seed errors map to exit codes") {
  TempDir dir;
  const std::string data = dir / "cube.csv";
  REQUIRE(run({"gen", "--kind", "cube", "--n", "50", "--d", "2", "--D", "3", "--out", data}).code == 0);
  CHECK(run({"seed", "--k", "0", "--input", data}).code == 2);
  CHECK(run({"seed", "--k", "51", "--input", data}).code == 2);
  CHECK(run({"seed", "--k", "3", "--m", "abc", "--input", data}).code == 2);
  CHECK(run({"seed", "--k", "3", "--ann", "kd", "--input", data}).code == 2);
  CHECK(run({"seed", "--k", "3", "--input", dir / "missing.csv"}).code == 3);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);

  const std::string ragged = dir / "ragged.csv";
  std::ofstream(ragged) << "0,0\n1\n";
  const Run r = run({"seed", "--k", "1", "--input", ragged});
  CHECK(r.code == 3);
  CHECK(r.err.find("ragged row 2") != std::string::npos);
}

TEST_CASE("bench command") {
  TempDir dir;
  const std::string data = dir / "cube.bin";
  REQUIRE(run({"gen", "--kind", "cube", "--n", "3000", "--d", "3", "--D", "6", "--out", data}).code == 0);
  const std::string csv = dir / "bench.csv";
  const Run r = run({"bench", "--input", data, "--algo", "qkmeans,kmeanspp", "--ks", "4,8,16",
                     "--runs", "5", "--seed", "11", "--out", csv});
  REQUIRE(r.code == 0);
  std::ifstream f(csv);
  std::string line;
  std::getline(f, line);
  CHECK(line.rfind("# manifest: ", 0) == 0);
  std::getline(f, line);
  CHECK(line == "dataset,algo,k,seed,time_ms,cost");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  CHECK(rows.size() == 30);

  // The cost column matches a standalone seed run with the same seed.
  const Run seed = run({"seed", "--input", data, "--algo", "kmeanspp", "--k", "8", "--seed", "13"});
  const double expected = json::parse(seed.out)["final_cost"].get<double>();
  bool matched = false;
  for (const auto& row : rows) {
    if (row[1] == "kmeanspp" && row[2] == "8" && row[3] == "13") {
      CHECK(std::stod(row[5]) == doctest::Approx(expected).epsilon(1e-15));
      matched = true;
    }
  }
  CHECK(matched);
  CHECK(json::parse(r.out)["summary"].size() == 6);
}

TEST_CASE("scaling command") {
  TempDir dir;
  const std::string data = dir / "cube.bin";
  REQUIRE(run({"gen", "--kind", "cube", "--n", "5000", "--d", "4", "--D", "12", "--seed", "2",
               "--out", data}).code == 0);
  const Run r = run({"scaling", "--input", data, "--ks", "4,8,16,32,64", "--runs", "2"});
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  for (const char* field : {"eps_hat", "r2_beta", "r2_eta", "fit_beta", "fit_eta", "points"}) {
    CHECK(report.contains(field));
  }
  const double eps = report["eps_hat"].get<double>();
  CHECK(eps >= 0.5 * 0.75);
  CHECK(eps <= 0.5 * 1.25);
  CHECK(run({"scaling", "--input", data, "--ks", "8"}).code == 2);
}

TEST_CASE("id command") {
  TempDir dir;
  const std::string data = dir / "cube.bin";
  REQUIRE(run({"gen", "--kind", "cube", "--n", "3000", "--d", "3", "--D", "3", "--out", data}).code == 0);
  const Run r = run({"id", "--input", data, "--ks", "10,20", "--subsample", "2000", "--runs", "2"});
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);
  CHECK(report["per_k"].size() == 2);
  CHECK(report["grand_mean"].get<double>() == doctest::Approx(3.0).epsilon(0.2));
  CHECK(run({"id", "--input", data, "--ks", "1"}).code == 2);
  CHECK(run({"id", "--input", data, "--runs", "0"}).code == 2);
}

TEST_CASE("validate command") {
  const Run ok = run({"validate"});
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out)["checks"].size() >= 8);
  const Run broken = run({"validate", "--break-oversampling"});
  CHECK(broken.code == 1);
  CHECK(broken.err.find("oversampling") != std::string::npos);
}
