#include "qkm/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "qkm/error.hpp"
#include "qkm/kernels.hpp"
#include "qkm/random.hpp"

namespace qkm {

namespace {

constexpr std::array<char, 4> kMagic{'Q', 'K', 'M', '1'};

double sum_squared_norms(std::span<const double> points, std::size_t n, std::size_t dim) {
  const auto& k = simd::kernels();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = points.data() + i * dim;
    total += k.dot(row, row, dim);
  }
  return total;
}

void center_in_place(std::vector<double>& points, std::size_t n, std::size_t dim) {
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += points[i * dim + j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) points[i * dim + j] -= mean[j];
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                  static_cast<char>((v >> 16) & 0xff),
                                  static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes.data(), bytes.size());
}

Dataset parse_bin(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw ParseError("binary dataset: missing QKM1 header", 0);
  }
  const std::size_t n = read_u32_le(p + 4);
  const std::size_t dim = read_u32_le(p + 8);
  if (n == 0) throw EmptyDatasetError("binary dataset has no rows");
  if (dim == 0) throw ParseError("binary dataset: zero dimension", 0);
  const std::size_t count = n * dim;
  if (bytes.size() != 12 + 4 * count) {
    throw ParseError("binary dataset: payload size does not match header", 0);
  }
  std::vector<double> points(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(read_u32_le(p + 12 + 4 * i));
    if (!std::isfinite(f)) throw ParseError("binary dataset: non-finite value", i / dim + 1);
    points[i] = static_cast<double>(f);
  }
  return Dataset(std::move(points), n, dim);
}

// Rows of an orthonormal d x D frame (modified Gram-Schmidt, two passes).
std::vector<double> random_frame(std::size_t d, std::size_t D, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> frame(d * D);
  for (std::size_t r = 0; r < d; ++r) {
    std::span<double> v(frame.data() + r * D, D);
    for (;;) {
      for (double& x : v) x = normal(rng);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t q = 0; q < r; ++q) {
          std::span<const double> u(frame.data() + q * D, D);
          const double proj = simd::dot(u, v);
          for (std::size_t j = 0; j < D; ++j) v[j] -= proj * u[j];
        }
      }
      const double norm = std::sqrt(simd::squared_norm(v));
      if (norm > 1e-6) {
        for (double& x : v) x /= norm;
        break;
      }
    }
  }
  return frame;
}

}  // namespace

Dataset::Dataset(std::vector<double> points, std::size_t n, std::size_t dim)
    : points_(std::move(points)), n_(n), dim_(dim) {
  if (n_ == 0) throw EmptyDatasetError("dataset has no rows");
  if (dim_ == 0) throw std::invalid_argument("dataset dimension must be positive");
  if (points_.size() != n_ * dim_) {
    throw std::invalid_argument("dataset buffer size does not match n * dim");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i])) {
      throw std::invalid_argument("non-finite coordinate in row " + std::to_string(i / dim_ + 1));
    }
  }
}

Dataset Dataset::make_centered(std::vector<double> points, std::size_t n, std::size_t dim) {
  Dataset ds(std::move(points), n, dim);
  ds.centered_ = true;
  ds.frob_sq_ = sum_squared_norms(ds.points_, n, dim);
  return ds;
}

PointSet::PointSet(std::vector<double> coords, std::size_t dim)
    : coords_(std::move(coords)), dim_(dim) {
  if (dim_ == 0 || coords_.size() % dim_ != 0) {
    throw std::invalid_argument("point set buffer is not a multiple of the dimension");
  }
}

void PointSet::push_back(std::span<const double> point) {
  if (dim_ == 0) dim_ = point.size();
  if (point.size() != dim_) throw std::invalid_argument("point dimension mismatch");
  coords_.insert(coords_.end(), point.begin(), point.end());
}

FileFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".csv" || ext == ".txt") ? FileFormat::csv : FileFormat::bin;
}

Dataset parse_csv(std::string_view text) {
  std::vector<double> points;
  std::size_t dim = 0;
  std::size_t n = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t fields = 0;
    for (;;) {
      const auto comma = line.find(',');
      const std::string_view field = trim(line.substr(0, comma));
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError("row " + std::to_string(n + 1) + ": malformed value '" +
                             std::string(field) + "'",
                         n + 1);
      }
      if (!std::isfinite(value)) {
        throw ParseError("row " + std::to_string(n + 1) + ": non-finite value", n + 1);
      }
      points.push_back(value);
      ++fields;
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    ++n;
    if (n == 1) {
      dim = fields;
    } else if (fields != dim) {
      throw ParseError("ragged row " + std::to_string(n) + ": expected " + std::to_string(dim) +
                           " values, found " + std::to_string(fields),
                       n);
    }
  }
  if (n == 0) throw EmptyDatasetError("csv dataset has no rows");
  return Dataset(std::move(points), n, dim);
}

Dataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();
  return format == FileFormat::csv ? parse_csv(bytes) : parse_bin(bytes);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset file: " + path.string());
  if (format == FileFormat::bin) {
    out.write(kMagic.data(), kMagic.size());
    write_u32_le(out, static_cast<std::uint32_t>(ds.size()));
    write_u32_le(out, static_cast<std::uint32_t>(ds.dim()));
    for (const double v : ds.data()) {
      write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  } else {
    std::array<char, 64> buf{};
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto row = ds.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j > 0) out.put(',');
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), row[j]);
        out.write(buf.data(), res.ptr - buf.data());
      }
      out.put('\n');
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::size_t jl_target_dim(double eps, std::size_t k) {
  if (!(eps > 0.0 && eps < 0.25)) throw std::invalid_argument("eps_jl must lie in (0, 1/4)");
  const double kk = static_cast<double>(std::max<std::size_t>(k, 2));
  return static_cast<std::size_t>(std::ceil(8.0 * std::log(kk / eps) / (eps * eps)));
}

Dataset preprocess(const Dataset& ds, std::optional<JlOptions> jl) {
  const std::size_t n = ds.size();
  std::size_t dim = ds.dim();
  std::vector<double> points(ds.data().begin(), ds.data().end());

  if (jl) {
    const std::size_t target = jl_target_dim(jl->eps, jl->k);
    if (target < dim) {
      Rng rng(derive_seed(jl->seed, stream::kJl));
      std::normal_distribution<double> normal;
      // Stored transposed (target rows of length dim) so each output coordinate is a dot product.
      std::vector<double> projection(target * dim);
      const double scale = 1.0 / std::sqrt(static_cast<double>(target));
      for (double& g : projection) g = normal(rng) * scale;
      std::vector<double> projected(n * target);
      const auto& kern = simd::kernels();
      for (std::size_t i = 0; i < n; ++i) {
        kern.matvec(projection.data(), target, dim, points.data() + i * dim,
                    projected.data() + i * target);
      }
      points = std::move(projected);
      dim = target;
    }
  }
  center_in_place(points, n, dim);
  return Dataset::make_centered(std::move(points), n, dim);
}

Dataset gen_manifold(const SyntheticSpec& spec) {
  const std::size_t d = spec.intrinsic_dim;
  const std::size_t D = spec.ambient_dim;
  if (d == 0 || D == 0) throw std::invalid_argument("dimensions must be positive");
  if (d > D) throw std::invalid_argument("intrinsic dimension exceeds ambient dimension");
  if (spec.n == 0) throw EmptyDatasetError("synthetic dataset needs n >= 1");

  Rng rng(spec.seed);
  std::normal_distribution<double> normal;
  std::vector<double> latent(spec.n * d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::span<double> p(latent.data() + i * d, d);
    if (spec.kind == ManifoldKind::unit_cube) {
      for (double& x : p) x = uniform01(rng);
    } else {
      double norm = 0.0;
      while (norm < 1e-12) {
        for (double& x : p) x = normal(rng);
        norm = std::sqrt(simd::squared_norm(p));
      }
      for (double& x : p) x /= norm;
    }
  }
  if (d == D) return Dataset(std::move(latent), spec.n, D);

  Rng frame_rng(derive_seed(spec.seed, stream::kFrame));
  const std::vector<double> frame = random_frame(d, D, frame_rng);
  std::vector<double> points(spec.n * D, 0.0);
  const auto& kern = simd::kernels();
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t r = 0; r < d; ++r) {
      kern.axpy(latent[i * d + r], frame.data() + r * D, points.data() + i * D, D);
    }
  }
  return Dataset(std::move(points), spec.n, D);
}

Dataset gen_gaussian_mixture(std::size_t n, std::size_t dim, std::size_t components,
                             double spread, std::uint64_t seed) {
  if (n == 0) throw EmptyDatasetError("mixture needs n >= 1");
  if (dim == 0 || components == 0) throw std::invalid_argument("dim and components must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> means(components * dim);
  for (double& m : means) m = spread * normal(rng);
  std::vector<double> points(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = uniform_index(rng, components);
    for (std::size_t j = 0; j < dim; ++j) points[i * dim + j] = means[c * dim + j] + normal(rng);
  }
  return Dataset(std::move(points), n, dim);
}

Dataset inject_noise(const Dataset& ds, double nsr, std::uint64_t seed) {
  if (!(nsr >= 0.0) || !std::isfinite(nsr)) throw std::invalid_argument("nsr must be a nonnegative real");
  if (!ds.centered()) throw std::invalid_argument("inject_noise requires a centered dataset");
  const std::size_t n = ds.size();
  const std::size_t dim = ds.dim();
  std::vector<double> points(ds.data().begin(), ds.data().end());
  if (nsr > 0.0) {
    const double sigma = std::sqrt(ds.frob_sq() / static_cast<double>(n * dim));
    Rng rng(derive_seed(seed, stream::kNoise));
    std::normal_distribution<double> normal(0.0, nsr * sigma);
    for (double& x : points) x += normal(rng);
  }
  center_in_place(points, n, dim);
  return Dataset::make_centered(std::move(points), n, dim);
}

Dataset subsample_rows(const Dataset& ds, std::size_t m, std::uint64_t seed) {
  if (m == 0 || m > ds.size()) throw std::invalid_argument("subsample size must lie in [1, n]");
  Rng rng(derive_seed(seed, stream::kSubsample));
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> points;
  points.reserve(m * ds.dim());
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + uniform_index(rng, ds.size() - i);
    std::swap(order[i], order[j]);
    const auto row = ds.row(order[i]);
    points.insert(points.end(), row.begin(), row.end());
  }
  if (ds.centered()) {
    center_in_place(points, m, ds.dim());
    return Dataset::make_centered(std::move(points), m, ds.dim());
  }
  return Dataset(std::move(points), m, ds.dim());
}

}  // namespace qkm
