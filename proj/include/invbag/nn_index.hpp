#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "invbag/core.hpp"

namespace invbag {

struct Neighbor {
  Index row = -1;
  double distance = 0.0;
};

/// Exact Euclidean nearest-neighbour search over a fixed point set (k-d tree).
///
/// Results are ordered by (distance, row) so equidistant points resolve to the
/// smaller row index. The index is immutable after construction and can be
/// queried from any number of threads.
class NNIndex {
 public:
  explicit NNIndex(FeatureMatrix points, Index leaf_size = 12);

  Index size() const { return points_.rows(); }
  Index dimension() const { return points_.cols(); }
  const FeatureMatrix& points() const { return points_; }

  /// Nearest point to `query`; row `exclude` (if >= 0) is skipped.
  Neighbor nearest(const double* query, Index exclude = -1) const;

  /// Nearest point whose row satisfies `accept(row)`. Returns row -1 if no
  /// row is accepted.
  Neighbor nearest_if(const double* query,
                      const std::function<bool(Index)>& accept) const;

  /// The k nearest points, closest first. Fewer are returned if the index
  /// holds fewer than k eligible points.
  std::vector<Neighbor> k_nearest(const double* query, Index k,
                                  Index exclude = -1) const;

 private:
  struct Node {
    Index begin = 0;
    Index end = 0;
    Index split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    Index left = -1;
    Index right = -1;
  };

  Index build(Index begin, Index end);
  template <typename Accept, typename Visit>
  void search(Index node, const double* query, Accept& accept, Visit& visit,
              const double& bound) const;

  FeatureMatrix points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  Index leaf_size_;
};

NNIndex build_nn_index(const FeatureMatrix& train);

}  // namespace invbag
