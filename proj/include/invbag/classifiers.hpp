#pragma once

#include <vector>

#include "invbag/core.hpp"
#include "invbag/engine.hpp"

// Event-level benchmark classifiers. Neither uses any knowledge of the signal
// density; both score larger for more signal-like events.

namespace invbag {

struct BinRange {
  double low = 0.0;
  double high = 1.0;
};

/// Per-feature equal-width histograms, normalized to probability mass.
struct HistogramDensity {
  std::vector<Eigen::VectorXd> edges;          // n_bins + 1 per feature
  std::vector<Eigen::VectorXd> probabilities;  // n_bins per feature
  double pseudo_count = 0.0;

  Index n_features() const { return static_cast<Index>(edges.size()); }
  Index n_bins() const { return edges.empty() ? 0 : edges.front().size() - 1; }
  /// Bin of `x` for `feature`; values outside the range go to the edge bins.
  Index bin(Index feature, double x) const;
  double probability(Index feature, double x) const;
};

/// Training min/max per feature, padded by 1% of the span on each side. A
/// constant feature is padded by 0.5 on each side.
std::vector<BinRange> padded_ranges(const FeatureMatrix& range_source);

HistogramDensity fit_histogram(const FeatureMatrix& sample, Index n_bins,
                               double pseudo_count,
                               const std::vector<BinRange>& ranges);
HistogramDensity fit_histogram(const FeatureMatrix& sample, Index n_bins,
                               double pseudo_count,
                               const FeatureMatrix& range_source);

inline constexpr Index kDefaultBins = 20;
inline constexpr double kDefaultPseudoCount = 1.0;
inline constexpr Index kDefaultKnnK = 10;

/// score(x) = sum over features of ln(p_test(x_f) / p_train(x_f)), with both
/// histograms binned on training-derived ranges. With pseudo_count 0 an event
/// in a bin the training sample never populated scores +inf.
ScoreVector relative_likelihood_scores(const FeatureMatrix& test,
                                       const FeatureMatrix& train,
                                       Index n_bins = kDefaultBins,
                                       double pseudo_count = kDefaultPseudoCount);

inline constexpr double kKnnEpsilon = 1e-12;

/// score(x) = (sum of distances to the k nearest training events) /
///            (sum of distances to the k nearest other test events + 1e-12).
ScoreVector knn_scores(const FeatureMatrix& test, const FeatureMatrix& train,
                       Index k = kDefaultKnnK);

}  // namespace invbag
