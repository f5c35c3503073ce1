#pragma once

#include <optional>
#include <span>
#include <vector>

#include "invbag/core.hpp"
#include "invbag/gof_stats.hpp"
#include "invbag/nn_index.hpp"

namespace invbag {

/// A statistic that scores an M-event subset against the background training
/// sample. Implementations must be pure and safe to call concurrently.
class SubsetStatistic {
 public:
  virtual ~SubsetStatistic() = default;

  /// Subset gathered from the test sample; `test_rows[j]` is the test row that
  /// produced `subset.row(j)`.
  virtual double test_subset(const FeatureMatrix& subset,
                             std::span<const Index> test_rows) const = 0;

  /// Subset gathered from the training sample itself. Every training row that
  /// appears in `train_rows` is held out of the reference for this evaluation,
  /// so the subset is compared against background it was not drawn from.
  virtual double train_subset(const FeatureMatrix& subset,
                              std::span<const Index> train_rows) const = 0;
};

/// The standardized training sample prepared for repeated scoring with one
/// statistic: presorted columns for KS/AD, pair sums for the energy test, and
/// a k-d tree plus leave-one-out neighbour lists for the NN ratio.
class TrainingReference final : public SubsetStatistic {
 public:
  TrainingReference(FeatureMatrix train, StatisticSpec spec);

  /// Caches the nearest-training distance of every test event (NN ratio only;
  /// a no-op for other statistics). Must precede concurrent use.
  void bind_test_sample(const FeatureMatrix& test);

  double test_subset(const FeatureMatrix& subset,
                     std::span<const Index> test_rows) const override;
  double train_subset(const FeatureMatrix& subset,
                      std::span<const Index> train_rows) const override;

  /// Statistic of an arbitrary subset against the full training sample.
  double score(const FeatureMatrix& subset) const;

  const FeatureMatrix& train() const { return train_; }
  const StatisticSpec& spec() const { return spec_; }

 private:
  double one_dimensional(const FeatureMatrix& subset,
                         const std::vector<char>* held_out) const;
  double energy(const FeatureMatrix& subset, std::span<const Index> held_rows,
                const std::vector<char>* held_out) const;
  double held_out_train_distance(Index row, const std::vector<char>& held_out) const;
  void check_subset(const FeatureMatrix& subset) const;

  FeatureMatrix train_;
  StatisticSpec spec_;

  // KS / AD: per-feature ascending values and the rows they came from.
  std::vector<std::vector<double>> sorted_values_;
  std::vector<std::vector<Index>> sorted_rows_;

  // Energy test.
  EnergyParams energy_params_{};
  double train_pair_sum_ = 0.0;
  std::vector<double> train_row_sums_;

  // NN ratio.
  std::optional<NNIndex> index_;
  std::vector<std::vector<Index>> loo_neighbors_;
  std::vector<double> loo_distances_;  // flattened alongside loo_neighbors_
  Index loo_k_ = 0;
  std::vector<double> test_train_distances_;
};

}  // namespace invbag
