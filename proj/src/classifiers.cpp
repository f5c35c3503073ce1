#include "invbag/classifiers.hpp"

#include <algorithm>
#include <cmath>

#include "invbag/nn_index.hpp"

namespace invbag {

Index HistogramDensity::bin(Index feature, double x) const {
  const auto& e = edges[static_cast<std::size_t>(feature)];
  const Index bins = e.size() - 1;
  const double width = (e(bins) - e(0)) / static_cast<double>(bins);
  const auto b = static_cast<Index>(std::floor((x - e(0)) / width));
  return std::clamp<Index>(b, 0, bins - 1);
}

double HistogramDensity::probability(Index feature, double x) const {
  return probabilities[static_cast<std::size_t>(feature)](bin(feature, x));
}

std::vector<BinRange> padded_ranges(const FeatureMatrix& range_source) {
  validate_features(range_source, "histogram range source");
  std::vector<BinRange> ranges;
  for (Index k = 0; k < range_source.cols(); ++k) {
    const double lo = range_source.col(k).minCoeff();
    const double hi = range_source.col(k).maxCoeff();
    const double pad = hi > lo ? 0.01 * (hi - lo) : 0.5;
    ranges.push_back({lo - pad, hi + pad});
  }
  return ranges;
}

HistogramDensity fit_histogram(const FeatureMatrix& sample, Index n_bins,
                               double pseudo_count,
                               const std::vector<BinRange>& ranges) {
  if (n_bins < 2) throw InvalidInput("fit_histogram: need at least 2 bins");
  if (!(pseudo_count >= 0.0)) throw InvalidInput("fit_histogram: negative pseudo-count");
  validate_features(sample, "histogram sample");
  if (static_cast<Index>(ranges.size()) != sample.cols()) {
    throw InvalidInput("fit_histogram: one range per feature required");
  }
  HistogramDensity h;
  h.pseudo_count = pseudo_count;
  for (Index k = 0; k < sample.cols(); ++k) {
    const auto& r = ranges[static_cast<std::size_t>(k)];
    if (!(r.high > r.low)) throw InvalidInput("fit_histogram: empty bin range");
    h.edges.push_back(Eigen::VectorXd::LinSpaced(n_bins + 1, r.low, r.high));
    h.probabilities.push_back(Eigen::VectorXd::Zero(n_bins));
  }
  for (Index k = 0; k < sample.cols(); ++k) {
    Eigen::VectorXd counts = Eigen::VectorXd::Constant(n_bins, pseudo_count);
    for (Index i = 0; i < sample.rows(); ++i) counts(h.bin(k, sample(i, k))) += 1.0;
    h.probabilities[static_cast<std::size_t>(k)] = counts / counts.sum();
  }
  return h;
}

HistogramDensity fit_histogram(const FeatureMatrix& sample, Index n_bins,
                               double pseudo_count, const FeatureMatrix& range_source) {
  return fit_histogram(sample, n_bins, pseudo_count, padded_ranges(range_source));
}

ScoreVector relative_likelihood_scores(const FeatureMatrix& test,
                                       const FeatureMatrix& train, Index n_bins,
                                       double pseudo_count) {
  validate_features(test, "test sample");
  validate_features(train, "training sample");
  if (test.cols() != train.cols()) {
    throw InvalidInput("relative_likelihood_scores: feature count mismatch");
  }
  const auto ranges = padded_ranges(train);
  const auto background = fit_histogram(train, n_bins, pseudo_count, ranges);
  const auto mixture = fit_histogram(test, n_bins, pseudo_count, ranges);

  ScoreVector s;
  s.score.resize(test.rows());
  s.untried.assign(static_cast<std::size_t>(test.rows()), false);
  for (Index i = 0; i < test.rows(); ++i) {
    double score = 0.0;
    for (Index k = 0; k < test.cols(); ++k) {
      const Index b = background.bin(k, test(i, k));
      score += std::log(mixture.probabilities[static_cast<std::size_t>(k)](b) /
                        background.probabilities[static_cast<std::size_t>(k)](b));
    }
    s.score(i) = score;
  }
  return s;
}

ScoreVector knn_scores(const FeatureMatrix& test, const FeatureMatrix& train, Index k) {
  validate_features(test, "test sample");
  validate_features(train, "training sample");
  if (test.cols() != train.cols()) throw InvalidInput("knn_scores: feature count mismatch");
  if (k < 1) throw InvalidInput("knn_scores: k must be positive");
  if (k > train.rows() || k + 1 > test.rows()) {
    throw InvalidInput("knn_scores: k = " + std::to_string(k) +
                       " too large for samples of " + std::to_string(train.rows()) +
                       " training and " + std::to_string(test.rows()) + " test events");
  }
  const NNIndex train_index(train);
  const NNIndex test_index(test);
  ScoreVector s;
  s.score.resize(test.rows());
  s.untried.assign(static_cast<std::size_t>(test.rows()), false);
  for (Index i = 0; i < test.rows(); ++i) {
    const double* x = test.row(i).data();
    double to_train = 0.0, to_test = 0.0;
    for (const auto& nb : train_index.k_nearest(x, k)) to_train += nb.distance;
    for (const auto& nb : test_index.k_nearest(x, k, i)) to_test += nb.distance;
    s.score(i) = to_train / (to_test + kKnnEpsilon);
  }
  return s;
}

}  // namespace invbag
