#include "qkm/ann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "qkm/error.hpp"
#include "qkm/kernels.hpp"
#include "qkm/random.hpp"

namespace qkm {

std::string_view backend_name(AnnBackend backend) {
  return backend == AnnBackend::exact ? "exact" : "lsh";
}

AnnBackend parse_backend(std::string_view name) {
  if (name == "exact") return AnnBackend::exact;
  if (name == "lsh") return AnnBackend::lsh;
  throw std::invalid_argument("unknown ANN backend: " + std::string(name));
}

void AnnIndex::insert(std::span<const double> center) {
  if (center.empty()) throw std::invalid_argument("cannot insert a zero-dimensional point");
  if (count_ == 0) {
    dim_ = center.size();
  } else if (center.size() != dim_) {
    throw std::invalid_argument("inserted center has dimension " + std::to_string(center.size()) +
                                ", index holds dimension " + std::to_string(dim_));
  }
  centers_.insert(centers_.end(), center.begin(), center.end());
  on_insert(count_++);
}

AnnResult AnnIndex::query(std::span<const double> probe) {
  if (count_ == 0) throw StateError("query on an empty ANN index");
  if (probe.size() != dim_) throw std::invalid_argument("probe dimension mismatch");
  return search(probe);
}

AnnResult AnnIndex::query_row(std::size_t key, std::span<const double> probe) {
  if (count_ == 0) throw StateError("query on an empty ANN index");
  if (probe.size() != dim_) throw std::invalid_argument("probe dimension mismatch");
  Memo& memo = memo_for(key);
  if (memo.seen == 0) {
    memo = {search(probe), count_};
    return memo.best;
  }
  if (memo.seen == count_) return memo.best;
  // Centers [0, seen) already satisfied the contract for memo.best; merging
  // with either an exact scan of the new ones or a fresh search keeps it.
  const AnnResult fresh = count_ - memo.seen <= incremental_scan_limit()
                              ? scan(probe, memo.seen, count_)
                              : search(probe);
  if (fresh.dist_sq < memo.best.dist_sq) memo.best = fresh;
  memo.seen = count_;
  return memo.best;
}

AnnIndex::Memo& AnnIndex::memo_for(std::size_t key) {
  if (key < dense_.size()) return dense_[key];
  return cache_.try_emplace(key, Memo{{0, 0.0}, 0}).first->second;
}

double AnnIndex::distance_to(std::size_t ordinal, std::span<const double> probe) {
  ++distance_evals_;
  return simd::kernels().squared_distance(centers_.data() + ordinal * dim_, probe.data(), dim_);
}

AnnResult AnnIndex::scan(std::span<const double> probe, std::size_t first, std::size_t last) {
  distance_evals_ += last - first;
  const auto hit = simd::kernels().nearest(probe.data(), centers_.data() + first * dim_,
                                           last - first, dim_);
  return {first + hit.index, hit.dist_sq};
}

namespace {

class ExactIndex final : public AnnIndex {
 public:
  ExactIndex() : AnnIndex(AnnBackend::exact, 1.0) {}

 protected:
  void on_insert(std::size_t) override {}
  AnnResult search(std::span<const double> probe) override { return scan(probe, 0, size()); }
  std::size_t incremental_scan_limit() const override {
    return std::numeric_limits<std::size_t>::max();
  }
};

// Ball tree over a fixed set of center ordinals. Nodes are split along the
// direction between two far-apart points, which adapts to data lying near a
// low-dimensional subspace of the ambient space.
class BallTree {
 public:
  BallTree(const AnnIndex& index, std::vector<std::uint32_t> ordinals)
      : index_(&index), order_(std::move(ordinals)), nodes_(1), centroids_(index.dim(), 0.0) {
    build(0, 0, order_.size());
  }

  std::size_t size() const noexcept { return order_.size(); }
  std::vector<std::uint32_t> take_ordinals() && { return std::move(order_); }

  // Visits every center that could lie within radius(best) of the probe,
  // where radius is re-evaluated as best improves.
  template <typename Visit, typename Radius>
  void search(std::span<const double> probe, Visit&& visit, Radius&& radius) {
    nodes_[0].probe_dist_sq = centroid_distance(nodes_[0], probe);
    std::vector<std::uint32_t>& stack = stack_;
    stack.assign(1, 0);
    while (!stack.empty()) {
      const Node& node = nodes_[stack.back()];
      stack.pop_back();
      if (std::sqrt(node.probe_dist_sq) - node.radius > radius()) continue;
      if (node.left == 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) visit(order_[i]);
        continue;
      }
      Node& l = nodes_[node.left];
      Node& r = nodes_[node.left + 1];
      l.probe_dist_sq = centroid_distance(l, probe);
      r.probe_dist_sq = centroid_distance(r, probe);
      // Nearer child last so it is popped first.
      if (l.probe_dist_sq < r.probe_dist_sq) {
        stack.push_back(node.left + 1);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.left + 1);
      }
    }
  }

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::uint32_t left = 0;  // children at left, left + 1; 0 for leaves
    double radius = 0.0;
    double probe_dist_sq = 0.0;
  };

  const double* point(std::uint32_t ordinal) const { return index_->center(ordinal).data(); }

  double centroid_distance(const Node& node, std::span<const double> probe) const {
    const std::size_t id = static_cast<std::size_t>(&node - nodes_.data());
    return simd::kernels().squared_distance(centroids_.data() + id * index_->dim(), probe.data(),
                                            index_->dim());
  }

  void build(std::uint32_t id, std::size_t begin, std::size_t end) {
    const std::size_t dim = index_->dim();
    const auto& k = simd::kernels();
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    double* centroid = centroids_.data() + id * dim;
    for (std::size_t i = begin; i < end; ++i) k.axpy(1.0, point(order_[i]), centroid, dim);
    for (std::size_t j = 0; j < dim; ++j) centroid[j] /= static_cast<double>(end - begin);

    double radius_sq = 0.0;
    std::size_t far = begin;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = k.squared_distance(point(order_[i]), centroid, dim);
      if (d > radius_sq) {
        radius_sq = d;
        far = i;
      }
    }
    // Widened so that rounding in the query-side bound never prunes a member.
    nodes_[id].radius = std::sqrt(radius_sq) * (1.0 + 1e-9) + 1e-12;
    if (end - begin <= kLeafSize || radius_sq == 0.0) return;

    const double* a = point(order_[far]);
    const double* b = a;
    double widest = -1.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = k.squared_distance(point(order_[i]), a, dim);
      if (d > widest) {
        widest = d;
        b = point(order_[i]);
      }
    }
    std::vector<double> axis(dim);
    for (std::size_t j = 0; j < dim; ++j) axis[j] = b[j] - a[j];
    const auto proj = [&](std::uint32_t o) { return k.dot(point(o), axis.data(), dim); };
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::uint32_t x, std::uint32_t y) { return proj(x) < proj(y); });

    const auto left = static_cast<std::uint32_t>(nodes_.size());
    nodes_[id].left = left;
    nodes_.resize(nodes_.size() + 2);
    centroids_.resize(centroids_.size() + 2 * dim, 0.0);
    build(left, begin, mid);
    build(left + 1, mid, end);
  }

  const AnnIndex* index_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::vector<double> centroids_;
  std::vector<std::uint32_t> stack_;
};

// Random-hyperplane LSH with multi-table lookup. Bucket candidates give an
// upper bound on the nearest distance; the answer is then certified by
// searching ball trees for any center closer than sqrt(rho) times that
// bound. The trees form a binary-counter forest so inserts stay cheap.
// Empty buckets fall back to an exact search.
class LshIndex final : public AnnIndex {
 public:
  LshIndex(double rho, std::uint64_t seed)
      : AnnIndex(AnnBackend::lsh, rho),
        seed_(seed),
        tables_(lsh_table_count(rho)),
        bits_(lsh_signature_bits()),
        buckets_(tables_ << bits_) {}

 protected:
  void on_insert(std::size_t ordinal) override {
    const auto c = center(ordinal);
    if (ordinal == 0) draw_hyperplanes();
    for (std::size_t t = 0; t < tables_; ++t) {
      buckets_[(t << bits_) | signature(t, c)].push_back(static_cast<std::uint32_t>(ordinal));
    }
    stamp_.push_back(0);

    std::vector<std::uint32_t> merged{static_cast<std::uint32_t>(ordinal)};
    while (!forest_.empty() && forest_.back().size() == merged.size()) {
      std::vector<std::uint32_t> top = std::move(forest_.back()).take_ordinals();
      forest_.pop_back();
      merged.insert(merged.end(), top.begin(), top.end());
    }
    forest_.emplace_back(*this, std::move(merged));
  }

  AnnResult search(std::span<const double> probe) override {
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
    AnnResult best{0, std::numeric_limits<double>::infinity()};
    const auto consider = [&](std::uint32_t o) {
      if (stamp_[o] == epoch_) return;
      stamp_[o] = epoch_;
      const double d = distance_to(o, probe);
      if (d < best.dist_sq || (d == best.dist_sq && o < best.ordinal)) best = {o, d};
    };
    // Candidate budget of 3L, as in the classic multi-table query; the
    // certification pass below restores the guarantee either way.
    std::size_t budget = 3 * tables_;
    for (std::size_t t = 0; t < tables_ && budget > 0; ++t) {
      for (const std::uint32_t o : buckets_[(t << bits_) | signature(t, probe)]) {
        consider(o);
        if (--budget == 0) break;
      }
    }
    // With no bucket hit the search below runs with rho = 1, i.e. exactly.
    const double shrink = std::isinf(best.dist_sq) ? 1.0 : rho();
    const double slack = 1e-12 * std::sqrt(simd::squared_norm(probe));
    const auto radius = [&] {
      return std::sqrt(shrink * best.dist_sq) * (1.0 + 1e-12) + slack;
    };
    for (BallTree& tree : forest_) tree.search(probe, consider, radius);
    return best;
  }
  std::size_t incremental_scan_limit() const override { return tables_ * bits_; }

 private:
  void draw_hyperplanes() {
    Rng rng(derive_seed(seed_, stream::kAnn));
    std::normal_distribution<double> normal;
    hyperplanes_.resize(tables_ * bits_ * dim());
    for (double& g : hyperplanes_) g = normal(rng);
    projections_.resize(bits_);
  }

  // Tables are hashed lazily since a query often fills its budget early.
  std::size_t signature(std::size_t table, std::span<const double> x) {
    double* p = projections_.data();
    simd::kernels().matvec(hyperplanes_.data() + table * bits_ * dim(), bits_, dim(), x.data(), p);
    std::size_t code = 0;
    for (std::size_t b = 0; b < bits_; ++b) code |= static_cast<std::size_t>(p[b] >= 0.0) << b;
    return code;
  }

  std::uint64_t seed_;
  std::size_t tables_;
  std::size_t bits_;
  std::vector<std::vector<std::uint32_t>> buckets_;
  std::vector<double> hyperplanes_;
  std::vector<double> projections_;
  std::vector<BallTree> forest_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

}  // namespace

std::size_t lsh_table_count(double rho) {
  return static_cast<std::size_t>(std::ceil(std::log(1000.0) / rho));
}

std::size_t lsh_signature_bits() {
  return static_cast<std::size_t>(std::ceil(std::log2(1000.0)));
}

std::unique_ptr<AnnIndex> make_ann_index(AnnBackend backend, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
  if (backend == AnnBackend::exact) return std::make_unique<ExactIndex>();
  return std::make_unique<LshIndex>(rho, seed);
}

}  // namespace qkm
