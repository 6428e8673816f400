#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qkm {

/// Dense n x dim point matrix, row-major, immutable after construction.
/// `frob_sq` is the sum of squared row norms and is only meaningful once the
/// dataset has been centered by `preprocess`.
class Dataset {
 public:
  /// Validates shape and finiteness; throws EmptyDatasetError when n == 0,
  /// std::invalid_argument on shape mismatch or non-finite coordinates.
  Dataset(std::vector<double> points, std::size_t n, std::size_t dim);

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return dim_; }
  bool centered() const noexcept { return centered_; }
  double frob_sq() const noexcept { return frob_sq_; }

  std::span<const double> row(std::size_t i) const {
    return {points_.data() + i * dim_, dim_};
  }
  std::span<const double> data() const noexcept { return points_; }

  /// Marks already-centered coordinates and caches their squared norm sum.
  static Dataset make_centered(std::vector<double> points, std::size_t n,
                               std::size_t dim);

 private:
  std::vector<double> points_;
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  bool centered_ = false;
  double frob_sq_ = 0.0;
};

/// Small owned point set (centers, probes).
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::vector<double> coords, std::size_t dim);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return coords_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {coords_.data() + i * dim_, dim_}; }
  std::span<const double> data() const noexcept { return coords_; }

  void push_back(std::span<const double> point);

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::vector<double> coords_;
  std::size_t dim_ = 0;
};

enum class FileFormat { csv, bin };

/// csv for ".csv"/".txt", bin otherwise.
FileFormat format_from_path(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path, FileFormat format);
Dataset parse_csv(std::string_view text);
void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  FileFormat format);

struct JlOptions {
  double eps = 0.1;       // in (0, 1/4)
  std::size_t k = 2;      // number of centers the projection must preserve
  std::uint64_t seed = 0;
};

/// ceil(8 ln(max(k,2)/eps) / eps^2)
std::size_t jl_target_dim(double eps, std::size_t k);

/// Optional Gaussian projection (skipped when the target dimension is not
/// smaller than dim), then centering. Output is centered with frob_sq cached.
Dataset preprocess(const Dataset& ds, std::optional<JlOptions> jl = std::nullopt);

enum class ManifoldKind { unit_cube, unit_sphere };

struct SyntheticSpec {
  std::size_t intrinsic_dim = 1;
  std::size_t ambient_dim = 1;
  std::size_t n = 1;
  ManifoldKind kind = ManifoldKind::unit_cube;
  std::uint64_t seed = 0;
};

/// Uniform samples on [0,1]^d (or the unit sphere in R^d) mapped into R^D by a
/// seeded random orthonormal frame; identity map when d == D.
Dataset gen_manifold(const SyntheticSpec& spec);

/// `components` isotropic unit-variance Gaussians whose means are drawn from
/// N(0, spread^2 I); equal weights.
Dataset gen_gaussian_mixture(std::size_t n, std::size_t dim, std::size_t components,
                             double spread, std::uint64_t seed);

/// Adds N(0, (nsr * sigma)^2) to every coordinate, sigma = sqrt(frob_sq / (n dim)),
/// then re-centers. Requires a centered dataset.
Dataset inject_noise(const Dataset& ds, double nsr, std::uint64_t seed);

/// m distinct rows drawn uniformly (order of the draw); m <= n.
Dataset subsample_rows(const Dataset& ds, std::size_t m, std::uint64_t seed);

}  // namespace qkm
