#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "invbag/core.hpp"
#include "invbag/gof_stats.hpp"
#include "invbag/random.hpp"
#include "invbag/reference.hpp"

namespace invbag {

enum class Ordering {
  ratio_ok_tried,  // score = 1 - ok / tried
  mean_statistic,  // score = mean subset statistic over subsets holding the event
};

std::string to_string(Ordering o);
/// Accepts ratio|mean-stat.
Ordering parse_ordering(std::string_view s);

struct EngineConfig {
  Index subset_size = 100;
  std::int64_t n_subsets = 10000;
  StatisticSpec statistic{};
  Ordering ordering = Ordering::mean_statistic;
  double null_quantile = 0.5;
  std::int64_t n_calibration_subsets = 2000;
  std::uint64_t master_seed = 0;
  /// Worker threads; 0 means one per hardware thread. Never affects results.
  unsigned threads = 0;
  /// Calibration subsets are bootstrapped from a random pool of this many
  /// distinct training events, matching the duplicate structure of subsets
  /// drawn from a test sample of the same size. 0 uses the whole training
  /// sample as the pool.
  Index calibration_pool = 0;
};

/// Thrown when a configuration violates an engine constraint. The message
/// names the constraint.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Checks hard constraints (throws ConfigError) and returns soft warnings,
/// e.g. subsets larger than a tenth of the test sample.
std::vector<std::string> validate(const EngineConfig& cfg, Index n_test);

/// Statistic evaluation failed on one subset.
class StatisticFailure : public std::runtime_error {
 public:
  StatisticFailure(std::int64_t subset, const std::string& what);
  std::int64_t subset() const { return subset_; }

 private:
  std::int64_t subset_;
};

// -- subset draws -------------------------------------------------------------

/// M indices drawn uniformly with replacement from [0, n). Subset `k` of a
/// stream depends only on (stream_seed, k).
SubsetIndex draw_subset(std::uint64_t stream_seed, std::uint64_t k, Index n,
                        Index m);

/// M indices drawn with replacement from a random pool of `pool` distinct
/// rows out of [0, n); reduces to draw_subset when pool >= n.
SubsetIndex draw_pooled_subset(std::uint64_t stream_seed, std::uint64_t k,
                               Index n, Index pool, Index m);

// -- null distribution --------------------------------------------------------

struct NullDistribution {
  std::vector<double> values;  // ascending
  double quantile = 0.5;
  double threshold = 0.0;

  /// Sorts `values` and fixes the threshold at quantile q (linear
  /// interpolation between order statistics).
  static NullDistribution from_values(std::vector<double> values, double q);

  /// Fraction of null values strictly above `t`.
  double exceedance(double t) const;
};

/// Empirical q-quantile of ascending data, linear interpolation.
double quantile_sorted(const std::vector<double>& sorted, double q);

NullDistribution calibrate_null(const FeatureMatrix& train,
                                const SubsetStatistic& statistic,
                                const EngineConfig& cfg);
NullDistribution calibrate_null(const FeatureMatrix& train,
                                const EngineConfig& cfg);

// -- bagging ------------------------------------------------------------------

struct BaggingTallies {
  Vector<std::int64_t> tried;
  Vector<std::int64_t> ok;
  Eigen::VectorXd stat_sum;

  Index size() const { return tried.size(); }
  std::int64_t total_tried() const { return tried.sum(); }
};

struct BaggingRun {
  BaggingTallies tallies;
  /// Statistic of every subset, in subset order.
  std::vector<double> subset_statistics;
};

BaggingRun run_inverse_bagging(const FeatureMatrix& test,
                               const SubsetStatistic& statistic,
                               const NullDistribution& null,
                               const EngineConfig& cfg);
/// Builds the training reference for `cfg.statistic` and runs the bagging.
BaggingRun run_inverse_bagging(const FeatureMatrix& test,
                               const FeatureMatrix& train,
                               const NullDistribution& null,
                               const EngineConfig& cfg);

struct ScoreVector {
  Eigen::VectorXd score;      // larger = more signal-like
  std::vector<bool> untried;  // untried events carry score -inf

  Index size() const { return score.size(); }
  Index n_untried() const;
};

ScoreVector score_events(const BaggingTallies& t, Ordering ordering);

/// Full pipeline on standardized inputs: build the reference, calibrate the
/// null on `train` with a pool the size of `test`, bag, and return the tallies.
struct InverseBaggingResult {
  NullDistribution null;
  BaggingRun run;
};
InverseBaggingResult inverse_bagging(const FeatureMatrix& test,
                                     const FeatureMatrix& train,
                                     EngineConfig cfg);

}  // namespace invbag
