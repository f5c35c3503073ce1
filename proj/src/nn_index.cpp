#include "invbag/nn_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>

namespace invbag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool closer(double d2a, Index ra, double d2b, Index rb) {
  return d2a < d2b || (d2a == d2b && ra < rb);
}

}  // namespace

NNIndex::NNIndex(FeatureMatrix points, Index leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<Index>(1, leaf_size)) {
  validate_features(points_, "nearest-neighbour index");
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), Index{0});
  nodes_.reserve(static_cast<std::size_t>(2 * points_.rows() / leaf_size_ + 2));
  build(0, points_.rows());
}

Index NNIndex::build(Index begin, Index end) {
  const Index id = static_cast<Index>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Index best_dim = 0;
  double best_spread = -1.0;
  for (Index k = 0; k < points_.cols(); ++k) {
    double lo = kInf, hi = -kInf;
    for (Index i = begin; i < end; ++i) {
      const double v = points_(order_[static_cast<std::size_t>(i)], k);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = k;
    }
  }
  if (best_spread <= 0.0) return id;  // all points coincide: keep as a leaf

  const Index mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end,
                   [&](Index a, Index b) {
                     return points_(a, best_dim) < points_(b, best_dim);
                   });
  const double split = points_(order_[static_cast<std::size_t>(mid)], best_dim);

  nodes_[static_cast<std::size_t>(id)].split_dim = best_dim;
  nodes_[static_cast<std::size_t>(id)].split_value = split;
  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

template <typename Accept, typename Visit>
void NNIndex::search(Index node_id, const double* query, Accept& accept,
                     Visit& visit, const double& bound) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.split_dim < 0) {
    const Index d = points_.cols();
    for (Index i = node.begin; i < node.end; ++i) {
      const Index row = order_[static_cast<std::size_t>(i)];
      if (!accept(row)) continue;
      visit(row, squared_distance(query, points_.row(row).data(), d));
    }
    return;
  }
  // Left holds values <= split, right holds values >= split.
  const double diff = query[node.split_dim] - node.split_value;
  const Index near_child = diff <= 0.0 ? node.left : node.right;
  const Index far_child = diff <= 0.0 ? node.right : node.left;
  search(near_child, query, accept, visit, bound);
  // Non-strict so equidistant points with smaller rows are still reached.
  if (diff * diff <= bound) search(far_child, query, accept, visit, bound);
}

Neighbor NNIndex::nearest(const double* query, Index exclude) const {
  auto accept = [exclude](Index row) { return row != exclude; };
  double best_d2 = kInf;
  Index best_row = -1;
  auto visit = [&](Index row, double d2) {
    if (best_row < 0 || closer(d2, row, best_d2, best_row)) {
      best_d2 = d2;
      best_row = row;
    }
  };
  search(0, query, accept, visit, best_d2);
  return best_row < 0 ? Neighbor{} : Neighbor{best_row, std::sqrt(best_d2)};
}

Neighbor NNIndex::nearest_if(const double* query,
                             const std::function<bool(Index)>& accept) const {
  double best_d2 = kInf;
  Index best_row = -1;
  auto visit = [&](Index row, double d2) {
    if (best_row < 0 || closer(d2, row, best_d2, best_row)) {
      best_d2 = d2;
      best_row = row;
    }
  };
  search(0, query, accept, visit, best_d2);
  return best_row < 0 ? Neighbor{} : Neighbor{best_row, std::sqrt(best_d2)};
}

std::vector<Neighbor> NNIndex::k_nearest(const double* query, Index k,
                                         Index exclude) const {
  if (k < 1) throw InvalidInput("k_nearest: k must be positive");
  auto accept = [exclude](Index row) { return row != exclude; };
  using Entry = std::pair<double, Index>;
  // Max-heap on (d2, row): the top is the current worst kept neighbour.
  std::priority_queue<Entry> heap;
  double bound = kInf;
  auto visit = [&](Index row, double d2) {
    if (static_cast<Index>(heap.size()) < k) {
      heap.emplace(d2, row);
    } else if (closer(d2, row, heap.top().first, heap.top().second)) {
      heap.pop();
      heap.emplace(d2, row);
    } else {
      return;
    }
    if (static_cast<Index>(heap.size()) == k) bound = heap.top().first;
  };
  search(0, query, accept, visit, bound);

  std::vector<Neighbor> out(heap.size());
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = Neighbor{heap.top().second, std::sqrt(heap.top().first)};
    heap.pop();
  }
  return out;
}

NNIndex build_nn_index(const FeatureMatrix& train) {
  if (train.rows() < 1) throw InvalidInput("build_nn_index: empty matrix");
  return NNIndex(train);
}

}  // namespace invbag
