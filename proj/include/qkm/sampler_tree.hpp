#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qkm/random.hpp"

namespace qkm {

/// Complete binary tree over nonnegative leaf weights: O(log n) sampling
/// proportional to weight, O(log n) point updates, O(1) total.
///
/// Leaves live at heap positions [capacity, 2*capacity); capacity is the
/// smallest power of two >= n and the padding leaves hold weight zero.
/// Weights are taken as given; callers wanting v(i)^2 sampling pass squares.
class SamplerTree {
 public:
  /// Throws std::invalid_argument on an empty, negative or non-finite weight
  /// vector and DegenerateError when every weight is zero.
  explicit SamplerTree(std::span<const double> weights);

  std::size_t size() const noexcept { return n_; }
  std::size_t capacity() const noexcept { return capacity_; }
  double total() const noexcept { return nodes_[1]; }
  double weight(std::size_t i) const { return nodes_[capacity_ + i]; }
  double probability(std::size_t i) const { return weight(i) / total(); }

  /// Heap-indexed node value, 1 <= pos < 2*capacity.
  double node(std::size_t pos) const { return nodes_[pos]; }

  /// Throws std::out_of_range for i >= size().
  void update(std::size_t i, double new_weight);

  std::size_t sample(Rng& rng) const;

  /// Deterministic descent for a uniform variate u in [0, 1). The target
  /// u * total is compared with each left subtree sum; equality goes left.
  std::size_t sample_at(double u) const;

 private:
  std::size_t n_ = 0;
  std::size_t capacity_ = 1;
  std::vector<double> nodes_;
};

}  // namespace qkm
