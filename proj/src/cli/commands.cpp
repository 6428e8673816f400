#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "manifest.hpp"
#include "qkm/analysis.hpp"
#include "qkm/dataset.hpp"
#include "qkm/error.hpp"
#include "qkm/parallel.hpp"
#include "qkm/seeding.hpp"
#include "qkm/validation.hpp"

namespace qkm::cli {

namespace {

using nlohmann::json;

class ValidationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InputOptions {
  std::string input;
  std::string format;  // csv | bin | "" (from extension)
  double jl_eps = 0.0;
  double nsr = 0.0;
};

struct SeedOptions {
  std::string algo = "qkmeans";
  std::string m = "10";
  double rho = 1.0;
  double delta = 0.0;
  std::string ann = "exact";
  std::uint64_t seed = 0;
};

void add_input_options(CLI::App& cmd, InputOptions& in) {
  cmd.add_option("--input", in.input, "Dataset path")->required();
  cmd.add_option("--format", in.format, "csv or bin (default: from extension)")
      ->check(CLI::IsMember({"csv", "bin"}));
  cmd.add_option("--jl-eps", in.jl_eps, "Gaussian projection distortion in (0, 0.25); 0 disables");
  cmd.add_option("--nsr", in.nsr, "Gaussian noise-to-signal ratio injected after centering");
}

void add_seed_options(CLI::App& cmd, SeedOptions& s) {
  cmd.add_option("--m", s.m, "Rejection chain length (integer or 'inf')");
  cmd.add_option("--rho", s.rho, "ANN approximation parameter in (0, 1]");
  cmd.add_option("--delta", s.delta, "Uniform share for rho-delta");
  cmd.add_option("--ann", s.ann, "exact or lsh")->check(CLI::IsMember({"exact", "lsh"}));
  cmd.add_option("--seed", s.seed, "RNG seed");
}

std::optional<std::size_t> parse_chain_length(const std::string& m) {
  if (m == "inf") return std::nullopt;
  std::size_t pos = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(m, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != m.size() || value == 0) {
    throw std::invalid_argument("--m must be a positive integer or 'inf', got '" + m + "'");
  }
  return static_cast<std::size_t>(value);
}

json input_params(const InputOptions& in) {
  return {{"input", in.input}, {"format", in.format}, {"jl_eps", in.jl_eps}, {"nsr", in.nsr}};
}

json seed_params(const SeedOptions& s) {
  return {{"algo", s.algo}, {"m", s.m},       {"rho", s.rho},
          {"delta", s.delta}, {"ann", s.ann}, {"seed", s.seed}};
}

Dataset load_input(const InputOptions& in, std::size_t k_for_jl, std::uint64_t seed) {
  const std::filesystem::path path(in.input);
  const FileFormat format = in.format.empty() ? format_from_path(path)
                            : in.format == "csv" ? FileFormat::csv
                                                 : FileFormat::bin;
  const Dataset raw = load_dataset(path, format);
  std::optional<JlOptions> jl;
  if (in.jl_eps != 0.0) jl = JlOptions{in.jl_eps, k_for_jl, seed};
  Dataset ds = preprocess(raw, jl);
  if (in.nsr < 0.0) throw std::invalid_argument("--nsr must be nonnegative");
  if (in.nsr > 0.0) ds = inject_noise(ds, in.nsr, seed);
  return ds;
}

SeedingResult run_seeder(const Dataset& ds, std::size_t k, const SeedOptions& s) {
  if (s.algo == "qkmeans") {
    RejectionConfig cfg;
    cfg.chain_length = parse_chain_length(s.m);
    cfg.rho = s.rho;
    cfg.seed = s.seed;
    cfg.ann = parse_backend(s.ann);
    return qkmeans(ds, k, cfg);
  }
  if (s.algo == "kmeanspp") return kmeanspp_exact(ds, k, s.seed);
  if (s.algo == "uniform") return uniform_seeding(ds, k, s.seed);
  if (s.algo == "rho-delta") return rho_delta_reference(ds, k, s.rho, s.delta, s.seed);
  throw std::invalid_argument("unknown --algo '" + s.algo + "'");
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(out_path, std::ios::trunc);
  if (!file) throw IoError("cannot write " + out_path);
  file << text;
  if (!file) throw IoError("write failed: " + out_path);
}

RunManifest make_manifest(const std::string& command, json params, const std::string& input) {
  RunManifest m;
  m.command = command;
  m.params = std::move(params);
  m.timestamp = utc_timestamp();
  if (!input.empty()) m.input_digest = fnv1a_file_digest(input);
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

json fit_json(const PowerLawFit& fit) {
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"r2", fit.r_squared},
          {"ci95", {fit.ci95_slope.first, fit.ci95_slope.second}},
          {"points_used", fit.points_used}};
}

// ---------------------------------------------------------------------------

int cmd_seed(const InputOptions& in, const SeedOptions& s, std::size_t k,
             const std::string& out_path, std::ostream& out) {
  const Dataset ds = load_input(in, k, s.seed);
  const SeedingResult result = run_seeder(ds, k, s);

  json params = input_params(in);
  params.update(seed_params(s));
  params["k"] = k;
  json centers = json::array();
  for (std::size_t c = 0; c < result.center_coords.size(); ++c) {
    const auto row = result.center_coords.row(c);
    centers.push_back(std::vector<double>(row.begin(), row.end()));
  }
  const json report = {{"algo", s.algo},
                       {"k", k},
                       {"center_indices", result.center_indices},
                       {"centers", centers},
                       {"final_cost", result.final_cost},
                       {"per_step_proposals", result.per_step_proposals},
                       {"fallback_count", result.fallback_count},
                       {"clamp_count", result.clamp_count},
                       {"elapsed_ns", result.elapsed.count()},
                       {"manifest", to_json(make_manifest("seed", params, in.input))}};
  emit(report.dump(2) + "\n", out_path, out);
  return kSuccess;
}

int cmd_bench(const InputOptions& in, const SeedOptions& base, const std::vector<std::string>& algos,
              const std::vector<std::size_t>& ks, std::size_t runs, std::size_t threads,
              const std::string& out_path, std::ostream& out) {
  if (algos.empty() || ks.empty()) throw std::invalid_argument("bench needs --algo and --ks");
  if (runs == 0) throw std::invalid_argument("--runs must be at least 1");
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  const Dataset ds = load_input(in, k_max, base.seed);
  const std::string dataset = std::filesystem::path(in.input).stem().string();

  struct Cell {
    std::string algo;
    std::size_t k;
    std::uint64_t seed;
    double time_ms = 0.0;
    double cost = 0.0;
  };
  std::vector<Cell> cells;
  for (const auto& algo : algos) {
    for (const std::size_t k : ks) {
      for (std::size_t r = 0; r < runs; ++r) cells.push_back({algo, k, base.seed + r});
    }
  }
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    SeedOptions s = base;
    s.algo = cells[i].algo;
    s.seed = cells[i].seed;
    const SeedingResult result = run_seeder(ds, cells[i].k, s);
    cells[i].time_ms = std::chrono::duration<double, std::milli>(result.elapsed).count();
    cells[i].cost = result.final_cost;
  });

  json params = input_params(in);
  params.update(seed_params(base));
  params["algos"] = algos;
  params["ks"] = ks;
  params["runs"] = runs;
  params["threads"] = threads;
  const json manifest = to_json(make_manifest("bench", params, in.input));

  std::ostringstream csv;
  csv << "# manifest: " << manifest.dump() << "\n";
  csv << "dataset,algo,k,seed,time_ms,cost\n";
  csv.precision(17);
  for (const Cell& c : cells) {
    csv << dataset << ',' << c.algo << ',' << c.k << ',' << c.seed << ',' << c.time_ms << ','
        << c.cost << '\n';
  }
  emit(csv.str(), out_path, out);

  json summary = json::array();
  for (const auto& algo : algos) {
    for (const std::size_t k : ks) {
      std::vector<double> times;
      std::vector<double> costs;
      for (const Cell& c : cells) {
        if (c.algo == algo && c.k == k) {
          times.push_back(c.time_ms);
          costs.push_back(c.cost);
        }
      }
      summary.push_back({{"algo", algo},
                         {"k", k},
                         {"mean_ms", std::accumulate(times.begin(), times.end(), 0.0) / times.size()},
                         {"median_ms", median(times)},
                         {"mean_cost", std::accumulate(costs.begin(), costs.end(), 0.0) / costs.size()}});
    }
  }
  if (!out_path.empty()) out << json{{"summary", summary}}.dump(2) << "\n";
  return kSuccess;
}

int cmd_scaling(const InputOptions& in, const std::vector<std::size_t>& ks, std::size_t runs,
                std::size_t lloyd_iters, std::uint64_t seed, std::size_t threads,
                const std::string& out_path, std::ostream& out) {
  if (ks.size() < 3) throw std::invalid_argument("--ks needs at least 3 values for a fit");
  if (runs == 0) throw std::invalid_argument("--runs must be at least 1");
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  const Dataset ds = load_input(in, k_max, seed);
  const BetaCurve curve = beta_curve(ds, ks, runs, lloyd_iters, seed, threads);
  if (curve.points.size() < 3) throw std::invalid_argument("fewer than 3 usable k values (k >= 2)");

  std::vector<double> kv;
  std::vector<double> beta;
  std::vector<double> eta;
  std::vector<double> eta_seeded;
  std::vector<double> beta_best;
  json points = json::array();
  for (const auto& p : curve.points) {
    kv.push_back(static_cast<double>(p.k));
    beta.push_back(p.mean_beta);
    eta.push_back(p.mean_eta);
    eta_seeded.push_back(p.mean_eta_seeded);
    beta_best.push_back(p.best_beta);
    points.push_back({{"k", p.k},
                      {"beta_mean", p.mean_beta},
                      {"eta_mean", p.mean_eta},
                      {"eta_seeded_mean", p.mean_eta_seeded},
                      {"beta_best", p.best_beta},
                      {"eta_best", p.best_eta}});
  }
  const PowerLawFit fit_beta = fit_power_law(kv, beta);
  const PowerLawFit fit_eta = fit_power_law(kv, eta);

  json params = input_params(in);
  params.update({{"ks", ks}, {"runs", runs}, {"lloyd_iters", lloyd_iters}, {"seed", seed}});
  const json report = {
      {"points", points},
      {"fit_beta", fit_json(fit_beta)},
      {"fit_eta", fit_json(fit_eta)},
      {"fit_eta_seeded", fit_json(fit_power_law(kv, eta_seeded))},
      {"fit_beta_best", fit_json(fit_power_law(kv, beta_best))},
      {"eps_hat", fit_beta.slope},
      {"d_hat", fit_beta.slope > 0.0 ? 2.0 / fit_beta.slope : std::numeric_limits<double>::infinity()},
      {"r2_beta", fit_beta.r_squared},
      {"r2_eta", fit_eta.r_squared},
      {"skipped_ks", curve.skipped_ks},
      {"manifest", to_json(make_manifest("scaling", params, in.input))}};
  emit(report.dump(2) + "\n", out_path, out);
  return kSuccess;
}

int cmd_id(const InputOptions& in, const std::vector<std::size_t>& ks, std::size_t subsample,
           std::size_t repeats, std::uint64_t seed, std::size_t threads,
           const std::string& out_path, std::ostream& out) {
  if (ks.empty()) throw std::invalid_argument("--ks must list at least one k_nn");
  for (const std::size_t k : ks) {
    if (k < 2) throw std::invalid_argument("k_nn must be at least 2");
  }
  if (repeats == 0) throw std::invalid_argument("--runs (repeats) must be at least 1");
  if (subsample == 0) throw std::invalid_argument("--subsample must be positive");
  const Dataset ds = load_input(in, 2, seed);

  std::vector<double> estimates(ks.size() * repeats);
  parallel_for(estimates.size(), threads, [&](std::size_t task) {
    const std::size_t k = ks[task / repeats];
    const std::size_t r = task % repeats;
    estimates[task] = mle_id(ds, k, subsample, derive_seed(seed, stream::kSubsample, r));
  });

  json per_k = json::array();
  double grand = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const std::vector<double> row(estimates.begin() + static_cast<std::ptrdiff_t>(i * repeats),
                                  estimates.begin() + static_cast<std::ptrdiff_t>((i + 1) * repeats));
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(repeats);
    grand += mean / static_cast<double>(ks.size());
    per_k.push_back({{"k_nn", ks[i]}, {"estimates", row}, {"mean", mean}});
  }
  json params = input_params(in);
  params.update({{"ks", ks}, {"subsample", subsample}, {"runs", repeats}, {"seed", seed}});
  const json report = {{"per_k", per_k},
                       {"grand_mean", grand},
                       {"manifest", to_json(make_manifest("id", params, in.input))}};
  emit(report.dump(2) + "\n", out_path, out);
  return kSuccess;
}

int cmd_validate(std::uint64_t seed, bool break_oversampling, const std::string& out_path,
                 std::ostream& out, std::ostream& err) {
  ValidationOptions options;
  options.seed = seed;
  options.break_oversampling = break_oversampling;
  const std::vector<CheckResult> checks = run_validation(options);
  json list = json::array();
  bool all = true;
  for (const auto& c : checks) {
    list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"metrics", c.metrics}});
    if (!c.passed) {
      all = false;
      err << "FAILED: " << c.name << " (" << c.detail << ")\n";
    }
  }
  json params = {{"seed", seed}, {"break_oversampling", break_oversampling}};
  const json report = {{"checks", list},
                       {"passed", all},
                       {"manifest", to_json(make_manifest("validate", params, ""))}};
  emit(report.dump(2) + "\n", out_path, out);
  return all ? kSuccess : kValidationFailure;
}

struct GenOptions {
  std::string kind = "cube";
  std::size_t n = 1000;
  std::size_t d = 2;
  std::size_t ambient = 2;
  std::size_t components = 10;
  double spread = 3.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string format;
};

int cmd_gen(const GenOptions& g) {
  Dataset ds = [&] {
    if (g.kind == "mixture") return gen_gaussian_mixture(g.n, g.ambient, g.components, g.spread, g.seed);
    SyntheticSpec spec;
    spec.intrinsic_dim = g.d;
    spec.ambient_dim = g.ambient;
    spec.n = g.n;
    spec.kind = g.kind == "sphere" ? ManifoldKind::unit_sphere : ManifoldKind::unit_cube;
    spec.seed = g.seed;
    return gen_manifold(spec);
  }();
  const FileFormat format = g.format.empty() ? format_from_path(g.out)
                            : g.format == "csv" ? FileFormat::csv
                                                : FileFormat::bin;
  save_dataset(ds, g.out, format);
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"qkm: fast k-means seeding by rejection sampling, with scaling-law analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  InputOptions in;
  SeedOptions seed_opts;
  std::string out_path;
  std::size_t k = 0;
  std::vector<std::size_t> ks;
  std::vector<std::string> algos;
  std::size_t runs = 5;
  std::size_t threads = default_thread_count();
  std::size_t lloyd_iters = 20;
  std::size_t subsample = 10000;
  bool break_oversampling = false;
  GenOptions gen;

  auto* seed_cmd = app.add_subcommand("seed", "Choose k centers with one seeding algorithm");
  add_input_options(*seed_cmd, in);
  add_seed_options(*seed_cmd, seed_opts);
  seed_cmd->add_option("--algo", seed_opts.algo, "qkmeans, kmeanspp, uniform or rho-delta")
      ->check(CLI::IsMember({"qkmeans", "kmeanspp", "uniform", "rho-delta"}));
  seed_cmd->add_option("--k", k, "Number of centers")->required();
  seed_cmd->add_option("--out", out_path, "Output JSON path (default stdout)");

  auto* bench_cmd = app.add_subcommand("bench", "Time seeding algorithms over a grid of k and seeds");
  add_input_options(*bench_cmd, in);
  add_seed_options(*bench_cmd, seed_opts);
  bench_cmd->add_option("--algo", algos, "Comma-separated algorithms")->delimiter(',')->required()
      ->check(CLI::IsMember({"qkmeans", "kmeanspp", "uniform", "rho-delta"}));
  bench_cmd->add_option("--ks", ks, "Comma-separated k values")->delimiter(',')->required();
  bench_cmd->add_option("--runs", runs, "Seeds per cell (seed, seed+1, ...)");
  bench_cmd->add_option("--threads", threads, "Worker threads");
  bench_cmd->add_option("--out", out_path, "Output CSV path (default stdout)");

  std::uint64_t seed = 0;
  auto* scaling_cmd = app.add_subcommand("scaling", "Fit beta_k and eta_k power laws");
  add_input_options(*scaling_cmd, in);
  scaling_cmd->add_option("--ks", ks, "Comma-separated k values (>= 3)")->delimiter(',')->required();
  scaling_cmd->add_option("--runs", runs, "k-means++ + Lloyd runs per k");
  scaling_cmd->add_option("--lloyd-iters", lloyd_iters, "Lloyd iterations per run");
  scaling_cmd->add_option("--seed", seed, "RNG seed");
  scaling_cmd->add_option("--threads", threads, "Worker threads");
  scaling_cmd->add_option("--out", out_path, "Output JSON path (default stdout)");

  auto* id_cmd = app.add_subcommand("id", "MLE intrinsic dimension over subsamples");
  add_input_options(*id_cmd, in);
  ks = {};
  id_cmd->add_option("--ks", ks, "Comma-separated k_nn values (default 5,10,20,50,100)")->delimiter(',');
  id_cmd->add_option("--subsample", subsample, "Rows per subsample");
  id_cmd->add_option("--runs", runs, "Independent subsamples per k_nn (default 10)");
  id_cmd->add_option("--seed", seed, "RNG seed");
  id_cmd->add_option("--threads", threads, "Worker threads");
  id_cmd->add_option("--out", out_path, "Output JSON path (default stdout)");

  auto* validate_cmd = app.add_subcommand("validate", "Run the invariant self-check suite");
  validate_cmd->add_option("--seed", seed, "RNG seed");
  validate_cmd->add_option("--out", out_path, "Output JSON path (default stdout)");
  validate_cmd->add_flag("--break-oversampling", break_oversampling)->group("");

  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic dataset");
  gen_cmd->add_option("--kind", gen.kind, "cube, sphere or mixture")
      ->check(CLI::IsMember({"cube", "sphere", "mixture"}));
  gen_cmd->add_option("--n", gen.n, "Rows");
  gen_cmd->add_option("--d", gen.d, "Intrinsic dimension (cube/sphere)");
  gen_cmd->add_option("--D", gen.ambient, "Ambient dimension");
  gen_cmd->add_option("--components", gen.components, "Mixture components");
  gen_cmd->add_option("--spread", gen.spread, "Std of mixture means");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--format", gen.format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));
  gen_cmd->add_option("--out", gen.out, "Output path")->required();

  std::vector<std::string> argv_store{"qkm"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*seed_cmd) return cmd_seed(in, seed_opts, k, out_path, out);
    if (*bench_cmd) return cmd_bench(in, seed_opts, algos, ks, runs, threads, out_path, out);
    if (*scaling_cmd) return cmd_scaling(in, ks, runs, lloyd_iters, seed, threads, out_path, out);
    if (*id_cmd) {
      if (ks.empty()) ks = {5, 10, 20, 50, 100};
      if (id_cmd->count("--runs") == 0) runs = 10;
      return cmd_id(in, ks, subsample, runs, seed, threads, out_path, out);
    }
    if (*validate_cmd) return cmd_validate(seed, break_oversampling, out_path, out, err);
    if (*gen_cmd) return cmd_gen(gen);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const EmptyDatasetError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  return kUsageError;
}

}  // namespace qkm::cli
