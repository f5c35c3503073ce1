#include "invbag/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

namespace invbag {

std::string to_string(Ordering o) {
  return o == Ordering::ratio_ok_tried ? "ratio" : "mean-stat";
}

Ordering parse_ordering(std::string_view s) {
  if (s == "ratio") return Ordering::ratio_ok_tried;
  if (s == "mean-stat") return Ordering::mean_statistic;
  throw InvalidInput("unknown ordering '" + std::string(s) + "'");
}

std::vector<std::string> validate(const EngineConfig& cfg, Index n_test) {
  if (cfg.subset_size < 2) {
    throw ConfigError("subset size M must be at least 2 (got " +
                      std::to_string(cfg.subset_size) + ")");
  }
  if (n_test >= 0 && cfg.subset_size > n_test) {
    throw ConfigError("subset size M = " + std::to_string(cfg.subset_size) +
                      " exceeds the test sample size " + std::to_string(n_test));
  }
  if (cfg.n_subsets < 1) throw ConfigError("number of subsets K must be positive");
  if (cfg.n_calibration_subsets < 1) {
    throw ConfigError("number of calibration subsets must be positive");
  }
  if (!(cfg.null_quantile > 0.0 && cfg.null_quantile < 1.0)) {
    throw ConfigError("null quantile q must lie strictly between 0 and 1");
  }
  if (cfg.calibration_pool < 0) {
    throw ConfigError("calibration pool size must be non-negative");
  }
  try {
    cfg.statistic.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  std::vector<std::string> warnings;
  if (n_test > 0 && static_cast<double>(cfg.subset_size) >
                        0.1 * static_cast<double>(n_test)) {
    warnings.push_back("subset size M = " + std::to_string(cfg.subset_size) +
                       " is more than 10% of the test sample; subsets will "
                       "overlap heavily");
  }
  return warnings;
}

StatisticFailure::StatisticFailure(std::int64_t subset, const std::string& what)
    : std::runtime_error("statistic evaluation failed on subset " +
                         std::to_string(subset) + ": " + what),
      subset_(subset) {}

namespace {

std::mt19937_64 subset_rng(std::uint64_t stream_seed, std::uint64_t k) {
  return std::mt19937_64(mix_seed(stream_seed, k));
}

unsigned worker_count(unsigned requested, std::int64_t jobs) {
  unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::int64_t>(n, std::max<std::int64_t>(1, jobs)));
}

/// Runs fn(k) for k in [0, count) on `threads` workers. If any call throws,
/// the failure with the smallest k is rethrown as StatisticFailure.
template <typename Fn>
void parallel_for(std::int64_t count, unsigned threads, Fn&& fn) {
  constexpr std::int64_t kChunk = 32;
  std::atomic<std::int64_t> next{0};
  std::mutex failure_mutex;
  std::int64_t failed_at = std::numeric_limits<std::int64_t>::max();
  std::string failure;

  auto worker = [&] {
    for (;;) {
      const std::int64_t begin = next.fetch_add(kChunk);
      if (begin >= count) return;
      const std::int64_t end = std::min(count, begin + kChunk);
      for (std::int64_t k = begin; k < end; ++k) {
        try {
          fn(k);
        } catch (const std::exception& e) {
          std::lock_guard lock(failure_mutex);
          if (k < failed_at) {
            failed_at = k;
            failure = e.what();
          }
          break;
        }
      }
    }
  };

  const unsigned n = worker_count(threads, count);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failed_at != std::numeric_limits<std::int64_t>::max()) {
    throw StatisticFailure(failed_at, failure);
  }
}

}  // namespace

SubsetIndex draw_subset(std::uint64_t stream_seed, std::uint64_t k, Index n,
                        Index m) {
  if (n < 1 || m < 0) throw InvalidInput("draw_subset: invalid sizes");
  auto rng = subset_rng(stream_seed, k);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  SubsetIndex rows(static_cast<std::size_t>(m));
  for (auto& r : rows) r = pick(rng);
  return rows;
}

SubsetIndex draw_pooled_subset(std::uint64_t stream_seed, std::uint64_t k,
                               Index n, Index pool, Index m) {
  if (pool <= 0 || pool >= n) return draw_subset(stream_seed, k, n, m);
  auto rng = subset_rng(stream_seed, k);
  std::uniform_int_distribution<Index> pick_slot(0, pool - 1);
  std::uniform_int_distribution<Index> pick_row(0, n - 1);
  // Pool slots are bound to distinct source rows the first time they are hit.
  std::unordered_map<Index, Index> slot_row;
  std::unordered_map<Index, bool> used;
  SubsetIndex rows(static_cast<std::size_t>(m));
  for (auto& r : rows) {
    const Index slot = pick_slot(rng);
    auto it = slot_row.find(slot);
    if (it == slot_row.end()) {
      Index row;
      do {
        row = pick_row(rng);
      } while (used.count(row) != 0);
      used.emplace(row, true);
      it = slot_row.emplace(slot, row).first;
    }
    r = it->second;
  }
  return rows;
}

// -- null distribution --------------------------------------------------------

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw InvalidInput("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile outside [0, 1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

NullDistribution NullDistribution::from_values(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidInput("null distribution needs at least one value");
  std::sort(values.begin(), values.end());
  NullDistribution d;
  d.quantile = q;
  d.threshold = quantile_sorted(values, q);
  d.values = std::move(values);
  return d;
}

double NullDistribution::exceedance(double t) const {
  const auto above = values.end() - std::upper_bound(values.begin(), values.end(), t);
  return static_cast<double>(above) / static_cast<double>(values.size());
}

NullDistribution calibrate_null(const FeatureMatrix& train,
                                const SubsetStatistic& statistic,
                                const EngineConfig& cfg) {
  validate(cfg, -1);
  if (train.rows() < 2) {
    throw InvalidInput("calibrate_null: training sample needs at least 2 events");
  }
  const std::uint64_t seed = derive_seed(cfg.master_seed, SeedStage::calibration);
  std::vector<double> values(static_cast<std::size_t>(cfg.n_calibration_subsets));
  parallel_for(cfg.n_calibration_subsets, cfg.threads, [&](std::int64_t k) {
    const auto rows = draw_pooled_subset(seed, static_cast<std::uint64_t>(k), train.rows(),
                                         cfg.calibration_pool, cfg.subset_size);
    values[static_cast<std::size_t>(k)] = statistic.train_subset(gather(train, rows), rows);
  });
  return NullDistribution::from_values(std::move(values), cfg.null_quantile);
}

NullDistribution calibrate_null(const FeatureMatrix& train, const EngineConfig& cfg) {
  const TrainingReference reference(train, cfg.statistic);
  return calibrate_null(train, reference, cfg);
}

// -- bagging ------------------------------------------------------------------

BaggingRun run_inverse_bagging(const FeatureMatrix& test,
                               const SubsetStatistic& statistic,
                               const NullDistribution& null,
                               const EngineConfig& cfg) {
  validate(cfg, test.rows());
  if (null.values.empty()) throw InvalidInput("run_inverse_bagging: empty null distribution");
  const std::uint64_t seed = derive_seed(cfg.master_seed, SeedStage::bagging);
  const Index n = test.rows();

  BaggingRun out;
  out.subset_statistics.resize(static_cast<std::size_t>(cfg.n_subsets));
  parallel_for(cfg.n_subsets, cfg.threads, [&](std::int64_t k) {
    const auto rows = draw_subset(seed, static_cast<std::uint64_t>(k), n, cfg.subset_size);
    const double t = statistic.test_subset(gather(test, rows), rows);
    if (!std::isfinite(t)) throw InvalidInput("statistic is not finite");
    out.subset_statistics[static_cast<std::size_t>(k)] = t;
  });

  // Accumulate in subset order so floating-point sums do not depend on the
  // worker count; the draws are regenerated from their streams.
  auto& t = out.tallies;
  t.tried = Vector<std::int64_t>::Zero(n);
  t.ok = Vector<std::int64_t>::Zero(n);
  t.stat_sum = Eigen::VectorXd::Zero(n);
  for (std::int64_t k = 0; k < cfg.n_subsets; ++k) {
    const double stat = out.subset_statistics[static_cast<std::size_t>(k)];
    const bool background_like = stat <= null.threshold;
    for (Index r : draw_subset(seed, static_cast<std::uint64_t>(k), n, cfg.subset_size)) {
      t.tried(r) += 1;
      if (background_like) t.ok(r) += 1;
      t.stat_sum(r) += stat;
    }
  }
  return out;
}

BaggingRun run_inverse_bagging(const FeatureMatrix& test, const FeatureMatrix& train,
                               const NullDistribution& null, const EngineConfig& cfg) {
  TrainingReference reference(train, cfg.statistic);
  reference.bind_test_sample(test);
  return run_inverse_bagging(test, reference, null, cfg);
}

Index ScoreVector::n_untried() const {
  return static_cast<Index>(std::count(untried.begin(), untried.end(), true));
}

ScoreVector score_events(const BaggingTallies& t, Ordering ordering) {
  ScoreVector s;
  const Index n = t.size();
  s.score.resize(n);
  s.untried.assign(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    const auto tried = t.tried(i);
    if (tried == 0) {
      s.untried[static_cast<std::size_t>(i)] = true;
      s.score(i) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double tr = static_cast<double>(tried);
    s.score(i) = ordering == Ordering::ratio_ok_tried
                     ? 1.0 - static_cast<double>(t.ok(i)) / tr
                     : t.stat_sum(i) / tr;
  }
  return s;
}

InverseBaggingResult inverse_bagging(const FeatureMatrix& test,
                                     const FeatureMatrix& train, EngineConfig cfg) {
  validate(cfg, test.rows());
  validate_features(test, "test sample");
  if (test.cols() != train.cols()) {
    throw InvalidInput("test and training samples have different feature counts");
  }
  if (cfg.calibration_pool == 0) cfg.calibration_pool = test.rows();
  TrainingReference reference(train, cfg.statistic);
  reference.bind_test_sample(test);
  InverseBaggingResult r;
  r.null = calibrate_null(train, reference, cfg);
  r.run = run_inverse_bagging(test, reference, r.null, cfg);
  return r;
}

}  // namespace invbag
