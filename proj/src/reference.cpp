#include "invbag/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invbag {

namespace {

constexpr Index kLeaveOneOutNeighbors = 8;

std::vector<char> held_out_mask(Index n, std::span<const Index> rows) {
  std::vector<char> mask(static_cast<std::size_t>(n), 0);
  for (Index r : rows) {
    if (r < 0 || r >= n) {
      throw InvalidInput("training row " + std::to_string(r) + " out of range");
    }
    mask[static_cast<std::size_t>(r)] = 1;
  }
  return mask;
}

std::vector<Index> unique_rows(std::span<const Index> rows) {
  std::vector<Index> u(rows.begin(), rows.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

}  // namespace

TrainingReference::TrainingReference(FeatureMatrix train, StatisticSpec spec)
    : train_(std::move(train)), spec_(spec) {
  validate_features(train_, "training sample");
  spec_.validate();
  const Index n = train_.rows();

  switch (spec_.kind) {
    case StatisticKind::ks:
    case StatisticKind::ad: {
      for (Index k = 0; k < train_.cols(); ++k) {
        std::vector<Index> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), Index{0});
        std::stable_sort(rows.begin(), rows.end(), [&](Index a, Index b) {
          return train_(a, k) < train_(b, k);
        });
        std::vector<double> values(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) values[i] = train_(rows[i], k);
        sorted_values_.push_back(std::move(values));
        sorted_rows_.push_back(std::move(rows));
      }
      break;
    }
    case StatisticKind::energy_log:
    case StatisticKind::energy_inverse:
    case StatisticKind::energy_gaussian: {
      energy_params_ = energy_params_for(spec_);
      train_pair_sum_ = energy_pair_sum(train_, energy_params_);
      train_row_sums_.assign(static_cast<std::size_t>(n), 0.0);
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
          const double w = energy_weight(row_distance(train_, i, train_, j), energy_params_);
          train_row_sums_[static_cast<std::size_t>(i)] += w;
          train_row_sums_[static_cast<std::size_t>(j)] += w;
        }
      }
      break;
    }
    case StatisticKind::nn_ratio: {
      index_.emplace(train_);
      loo_k_ = std::min<Index>(kLeaveOneOutNeighbors, n - 1);
      loo_neighbors_.resize(static_cast<std::size_t>(n));
      loo_distances_.resize(static_cast<std::size_t>(n * loo_k_));
      for (Index r = 0; r < n && loo_k_ > 0; ++r) {
        const auto nbrs = index_->k_nearest(train_.row(r).data(), loo_k_, r);
        auto& list = loo_neighbors_[static_cast<std::size_t>(r)];
        for (std::size_t j = 0; j < nbrs.size(); ++j) {
          list.push_back(nbrs[j].row);
          loo_distances_[static_cast<std::size_t>(r * loo_k_) + j] = nbrs[j].distance;
        }
      }
      break;
    }
  }
}

void TrainingReference::bind_test_sample(const FeatureMatrix& test) {
  if (spec_.kind != StatisticKind::nn_ratio) return;
  if (test.cols() != train_.cols()) {
    throw InvalidInput("test sample feature count does not match training sample");
  }
  test_train_distances_.resize(static_cast<std::size_t>(test.rows()));
  for (Index i = 0; i < test.rows(); ++i) {
    test_train_distances_[static_cast<std::size_t>(i)] =
        index_->nearest(test.row(i).data()).distance;
  }
}

void TrainingReference::check_subset(const FeatureMatrix& subset) const {
  if (subset.rows() < 1) throw InvalidInput("empty subset");
  if (subset.cols() != train_.cols()) {
    throw InvalidInput("subset feature count does not match training sample");
  }
  if (spec_.kind == StatisticKind::nn_ratio && subset.rows() < 2) {
    throw InvalidInput("nn-ratio statistic needs subsets of at least 2 events");
  }
}

double TrainingReference::one_dimensional(const FeatureMatrix& subset,
                                          const std::vector<char>* held_out) const {
  const Index d = train_.cols();
  std::vector<double> per_feature(static_cast<std::size_t>(d));
  std::vector<double> column(static_cast<std::size_t>(subset.rows()));
  std::vector<double> reference;
  for (Index k = 0; k < d; ++k) {
    Eigen::Map<Eigen::VectorXd>(column.data(), subset.rows()) = subset.col(k);
    std::sort(column.begin(), column.end());
    const auto& values = sorted_values_[static_cast<std::size_t>(k)];
    std::span<const double> ref(values);
    if (held_out != nullptr) {
      const auto& rows = sorted_rows_[static_cast<std::size_t>(k)];
      reference.clear();
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(*held_out)[static_cast<std::size_t>(rows[i])]) reference.push_back(values[i]);
      }
      if (reference.empty()) throw InvalidInput("every training row is held out");
      ref = reference;
    }
    per_feature[static_cast<std::size_t>(k)] =
        spec_.kind == StatisticKind::ks ? ks_sorted(column, ref) : ad_sorted(column, ref);
  }
  return combine_per_feature(per_feature, spec_.combine);
}

double TrainingReference::energy(const FeatureMatrix& subset,
                                 std::span<const Index> held_rows,
                                 const std::vector<char>* held_out) const {
  const double within_a = energy_pair_sum(subset, energy_params_);
  double within_b = train_pair_sum_;
  double cross = 0.0;
  Index m = train_.rows();
  if (held_out == nullptr) {
    cross = energy_cross_sum(subset, train_, energy_params_);
  } else {
    // Remove the held-out rows' pairs from the precomputed training sum; pairs
    // between two held-out rows were subtracted twice.
    const auto rows = unique_rows(held_rows);
    for (std::size_t a = 0; a < rows.size(); ++a) {
      within_b -= train_row_sums_[static_cast<std::size_t>(rows[a])];
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        within_b += energy_weight(row_distance(train_, rows[a], train_, rows[b]),
                                  energy_params_);
      }
    }
    m -= static_cast<Index>(rows.size());
    if (m < 1) throw InvalidInput("every training row is held out");
    for (Index i = 0; i < subset.rows(); ++i) {
      for (Index j = 0; j < train_.rows(); ++j) {
        if ((*held_out)[static_cast<std::size_t>(j)]) continue;
        cross += energy_weight(row_distance(subset, i, train_, j), energy_params_);
      }
    }
  }
  const double phi = energy_from_sums(within_a, static_cast<double>(subset.rows()),
                                      within_b, static_cast<double>(m), cross);
  if (!std::isfinite(phi)) {
    throw InvalidInput("energy statistic is not finite; increase epsilon");
  }
  return phi;
}

double TrainingReference::held_out_train_distance(
    Index row, const std::vector<char>& held_out) const {
  const auto& list = loo_neighbors_[static_cast<std::size_t>(row)];
  for (std::size_t j = 0; j < list.size(); ++j) {
    if (!held_out[static_cast<std::size_t>(list[j])]) {
      return loo_distances_[static_cast<std::size_t>(row * loo_k_) + j];
    }
  }
  const auto nb = index_->nearest_if(train_.row(row).data(), [&](Index r) {
    return !held_out[static_cast<std::size_t>(r)];
  });
  if (nb.row < 0) throw InvalidInput("every training row is held out");
  return nb.distance;
}

double TrainingReference::score(const FeatureMatrix& subset) const {
  check_subset(subset);
  switch (spec_.kind) {
    case StatisticKind::ks:
    case StatisticKind::ad:
      return one_dimensional(subset, nullptr);
    case StatisticKind::energy_log:
    case StatisticKind::energy_inverse:
    case StatisticKind::energy_gaussian:
      return energy(subset, {}, nullptr);
    case StatisticKind::nn_ratio:
      return nn_ratio_statistic(subset, *index_, spec_.nn_epsilon);
  }
  return 0.0;
}

double TrainingReference::test_subset(const FeatureMatrix& subset,
                                      std::span<const Index> test_rows) const {
  if (spec_.kind != StatisticKind::nn_ratio || test_train_distances_.empty()) {
    return score(subset);
  }
  check_subset(subset);
  if (static_cast<Index>(test_rows.size()) != subset.rows()) {
    throw InvalidInput("test_subset: one source row per subset row required");
  }
  std::vector<double> train_d(test_rows.size());
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    const auto r = static_cast<std::size_t>(test_rows[i]);
    if (r >= test_train_distances_.size()) {
      throw InvalidInput("test row " + std::to_string(r) + " out of range");
    }
    train_d[i] = test_train_distances_[r];
  }
  return nn_ratio_from_train_distances(subset, train_d, spec_.nn_epsilon);
}

double TrainingReference::train_subset(const FeatureMatrix& subset,
                                       std::span<const Index> train_rows) const {
  check_subset(subset);
  if (static_cast<Index>(train_rows.size()) != subset.rows()) {
    throw InvalidInput("train_subset: one source row per subset row required");
  }
  const auto mask = held_out_mask(train_.rows(), train_rows);
  switch (spec_.kind) {
    case StatisticKind::ks:
    case StatisticKind::ad:
      return one_dimensional(subset, &mask);
    case StatisticKind::energy_log:
    case StatisticKind::energy_inverse:
    case StatisticKind::energy_gaussian:
      return energy(subset, train_rows, &mask);
    case StatisticKind::nn_ratio: {
      std::vector<double> train_d(train_rows.size());
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        train_d[i] = held_out_train_distance(train_rows[i], mask);
      }
      return nn_ratio_from_train_distances(subset, train_d, spec_.nn_epsilon);
    }
  }
  return 0.0;
}

}  // namespace invbag
