#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qkm {

enum class AnnBackend { exact, lsh };

std::string_view backend_name(AnnBackend backend);
AnnBackend parse_backend(std::string_view name);

struct AnnResult {
  std::size_t ordinal;  // insertion ordinal of the returned center
  double dist_sq;
};

/// Nearest-center index over a growing center set.
///
/// Contract for every query: the returned center q satisfies
///   min_r |p - r|^2 <= |p - q|^2 <= min_r |p - r|^2 / rho.
/// The exact backend fixes rho = 1. Keyed queries (`query_row`) are in
/// addition monotone: for a fixed key the reported distance never increases
/// as centers are inserted.
class AnnIndex {
 public:
  virtual ~AnnIndex() = default;
  AnnIndex(const AnnIndex&) = delete;
  AnnIndex& operator=(const AnnIndex&) = delete;

  AnnBackend backend() const noexcept { return backend_; }
  double rho() const noexcept { return rho_; }
  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }

  /// Throws std::invalid_argument when the dimension differs from earlier inserts.
  void insert(std::span<const double> center);

  /// Throws StateError on an empty index.
  AnnResult query(std::span<const double> probe);

  /// Query memoized under `key` (a dataset row index).
  AnnResult query_row(std::size_t key, std::span<const double> probe);

  /// Keys below `count` are then memoized in a flat table instead of a map.
  void reserve_keys(std::size_t count) { dense_.assign(count, Memo{{0, 0.0}, 0}); }

  /// Drops the per-key memo; the index contents stay.
  void clear_cache() {
    cache_.clear();
    std::fill(dense_.begin(), dense_.end(), Memo{{0, 0.0}, 0});
  }

  std::span<const double> center(std::size_t ordinal) const {
    return {centers_.data() + ordinal * dim_, dim_};
  }

  /// Exact |probe - center|^2 evaluations performed so far.
  std::uint64_t distance_evaluations() const noexcept { return distance_evals_; }

 protected:
  AnnIndex(AnnBackend backend, double rho) : backend_(backend), rho_(rho) {}

  virtual void on_insert(std::size_t ordinal) = 0;
  virtual AnnResult search(std::span<const double> probe) = 0;
  /// Largest number of unseen centers worth scanning exhaustively instead of
  /// calling search() when refreshing a memoized key.
  virtual std::size_t incremental_scan_limit() const = 0;

  double distance_to(std::size_t ordinal, std::span<const double> probe);
  AnnResult scan(std::span<const double> probe, std::size_t first, std::size_t last);

 private:
  struct Memo {
    AnnResult best;
    std::size_t seen;  // centers covered by `best`; 0 means no entry
  };
  Memo& memo_for(std::size_t key);

  AnnBackend backend_;
  double rho_;
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<double> centers_;
  std::uint64_t distance_evals_ = 0;
  std::unordered_map<std::size_t, Memo> cache_;
  std::vector<Memo> dense_;
};

/// Number of hash tables: ceil(ln(1000) / rho).
std::size_t lsh_table_count(double rho);
/// Signature width in bits: ceil(log2(1000)).
std::size_t lsh_signature_bits();

/// Throws std::invalid_argument when rho is outside (0, 1]. The exact backend
/// ignores rho and reports 1.
std::unique_ptr<AnnIndex> make_ann_index(AnnBackend backend, double rho, std::uint64_t seed);

}  // namespace qkm
