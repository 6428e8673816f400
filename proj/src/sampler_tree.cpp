#include "qkm/sampler_tree.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qkm/error.hpp"

namespace qkm {

SamplerTree::SamplerTree(std::span<const double> weights) : n_(weights.size()) {
  if (n_ == 0) throw std::invalid_argument("sampler tree needs at least one weight");
  capacity_ = std::bit_ceil(n_);
  nodes_.assign(2 * capacity_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const double w = weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("sampler weight " + std::to_string(i) +
                                  " is negative or non-finite");
    }
    nodes_[capacity_ + i] = w;
  }
  for (std::size_t pos = capacity_ - 1; pos >= 1; --pos) {
    nodes_[pos] = nodes_[2 * pos] + nodes_[2 * pos + 1];
  }
  if (!(total() > 0.0)) throw DegenerateError("sampler tree weights are all zero");
}

void SamplerTree::update(std::size_t i, double new_weight) {
  if (i >= n_) throw std::out_of_range("sampler tree index out of range");
  if (!(new_weight >= 0.0) || !std::isfinite(new_weight)) {
    throw std::invalid_argument("sampler weight must be nonnegative and finite");
  }
  std::size_t pos = capacity_ + i;
  nodes_[pos] = new_weight;
  for (pos /= 2; pos >= 1; pos /= 2) nodes_[pos] = nodes_[2 * pos] + nodes_[2 * pos + 1];
}

std::size_t SamplerTree::sample(Rng& rng) const { return sample_at(uniform01(rng)); }

std::size_t SamplerTree::sample_at(double u) const {
  if (!(total() > 0.0)) throw DegenerateError("cannot sample from an all-zero tree");
  double target = u * total();
  std::size_t pos = 1;
  while (pos < capacity_) {
    const double left = nodes_[2 * pos];
    const double right = nodes_[2 * pos + 1];
    // A zero-mass side is never entered, whatever rounding did to target.
    if (right <= 0.0 || (left > 0.0 && target <= left)) {
      pos = 2 * pos;
    } else {
      target -= left;
      pos = 2 * pos + 1;
    }
  }
  return pos - capacity_;
}

}  // namespace qkm
