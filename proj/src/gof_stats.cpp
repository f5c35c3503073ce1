#include "invbag/gof_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>

namespace invbag {

void StatisticSpec::validate() const {
  if (!(energy_epsilon >= 0.0) || !std::isfinite(energy_epsilon)) {
    throw InvalidInput("energy epsilon must be a finite non-negative number");
  }
  if (!(gaussian_sigma > 0.0) || !std::isfinite(gaussian_sigma)) {
    throw InvalidInput("gaussian sigma must be positive");
  }
  if (!(nn_epsilon > 0.0) || !std::isfinite(nn_epsilon)) {
    throw InvalidInput("nn-ratio epsilon must be positive");
  }
}

std::string to_string(StatisticKind k) {
  switch (k) {
    case StatisticKind::ks: return "ks";
    case StatisticKind::ad: return "ad";
    case StatisticKind::energy_log: return "energy-log";
    case StatisticKind::energy_inverse: return "energy-inv";
    case StatisticKind::energy_gaussian: return "energy-gauss";
    case StatisticKind::nn_ratio: return "nnratio";
  }
  return "?";
}

std::string to_string(Combine c) { return c == Combine::max ? "max" : "mean"; }

StatisticKind parse_statistic_kind(std::string_view s) {
  for (auto k : {StatisticKind::ks, StatisticKind::ad, StatisticKind::energy_log,
                 StatisticKind::energy_inverse, StatisticKind::energy_gaussian,
                 StatisticKind::nn_ratio}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidInput("unknown statistic '" + std::string(s) + "'");
}

Combine parse_combine(std::string_view s) {
  if (s == "max") return Combine::max;
  if (s == "mean") return Combine::mean;
  throw InvalidInput("unknown combination mode '" + std::string(s) + "'");
}

bool is_one_dimensional(StatisticKind k) {
  return k == StatisticKind::ks || k == StatisticKind::ad;
}

namespace {

void require_nonempty(std::span<const double> a, std::span<const double> b,
                      const char* who) {
  if (a.empty() || b.empty()) {
    throw InvalidInput(std::string(who) + ": both samples must be nonempty");
  }
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double ks_sorted(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "ks_two_sample");
  const auto n = static_cast<std::int64_t>(a.size());
  const auto m = static_cast<std::int64_t>(b.size());
  // |i/n - j/m| scaled by n*m keeps the comparison in exact integers.
  std::int64_t i = 0, j = 0, best = 0;
  while (i < n && j < m) {
    const double v = std::min(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
    while (i < n && a[static_cast<std::size_t>(i)] == v) ++i;
    while (j < m && b[static_cast<std::size_t>(j)] == v) ++j;
    best = std::max(best, std::abs(i * m - j * n));
  }
  return static_cast<double>(best) / static_cast<double>(n * m);
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "ks_two_sample");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  return ks_sorted(sa, sb);
}

double ad_sorted(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "ad_two_sample");
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  const double total = n + m;

  std::size_t i = 0, j = 0;
  double cum_all = 0.0, cum_a = 0.0, cum_b = 0.0;
  double sum_a = 0.0, sum_b = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (i == a.size()) v = b[j];
    else if (j == b.size()) v = a[i];
    else v = std::min(a[i], b[j]);
    double fa = 0.0, fb = 0.0;
    while (i < a.size() && a[i] == v) { ++i; fa += 1.0; }
    while (j < b.size() && b[j] == v) { ++j; fb += 1.0; }
    const double ties = fa + fb;

    const double mid_all = cum_all + ties / 2.0;
    const double mid_a = cum_a + fa / 2.0;
    const double mid_b = cum_b + fb / 2.0;
    const double denom = mid_all * (total - mid_all) - total * ties / 4.0;
    if (denom > 0.0) {
      const double da = total * mid_a - n * mid_all;
      const double db = total * mid_b - m * mid_all;
      sum_a += ties * da * da / denom;
      sum_b += ties * db * db / denom;
    }
    cum_all += ties;
    cum_a += fa;
    cum_b += fb;
  }
  return (total - 1.0) / (total * total) * (sum_a / n + sum_b / m);
}

double ad_two_sample(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b, "ad_two_sample");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  return ad_sorted(sa, sb);
}

double combine_per_feature(std::span<const double> per_feature, Combine mode) {
  if (per_feature.empty()) {
    throw InvalidInput("combine_per_feature: no per-feature values");
  }
  if (mode == Combine::max) {
    return *std::max_element(per_feature.begin(), per_feature.end());
  }
  return std::accumulate(per_feature.begin(), per_feature.end(), 0.0) /
         static_cast<double>(per_feature.size());
}

double per_feature_statistic(const FeatureMatrix& a, const FeatureMatrix& b,
                             StatisticKind kind, Combine mode) {
  if (!is_one_dimensional(kind)) {
    throw InvalidInput("per_feature_statistic: only ks and ad are one-dimensional");
  }
  if (a.rows() < 1 || b.rows() < 1) {
    throw InvalidInput("per_feature_statistic: empty sample");
  }
  if (a.cols() != b.cols()) {
    throw InvalidInput("per_feature_statistic: feature count mismatch");
  }
  std::vector<double> per_feature(static_cast<std::size_t>(a.cols()));
  std::vector<double> ca(static_cast<std::size_t>(a.rows()));
  std::vector<double> cb(static_cast<std::size_t>(b.rows()));
  for (Index k = 0; k < a.cols(); ++k) {
    Eigen::Map<Eigen::VectorXd>(ca.data(), a.rows()) = a.col(k);
    Eigen::Map<Eigen::VectorXd>(cb.data(), b.rows()) = b.col(k);
    std::sort(ca.begin(), ca.end());
    std::sort(cb.begin(), cb.end());
    per_feature[static_cast<std::size_t>(k)] =
        kind == StatisticKind::ks ? ks_sorted(ca, cb) : ad_sorted(ca, cb);
  }
  return combine_per_feature(per_feature, mode);
}

double energy_pair_sum(const FeatureMatrix& a, const EnergyParams& p) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = i + 1; j < a.rows(); ++j) {
      s += energy_weight(row_distance(a, i, a, j), p);
    }
  }
  return s;
}

double energy_cross_sum(const FeatureMatrix& a, const FeatureMatrix& b,
                        const EnergyParams& p) {
  double s = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      s += energy_weight(row_distance(a, i, b, j), p);
    }
  }
  return s;
}

double energy_statistic(const FeatureMatrix& a, const FeatureMatrix& b,
                        const EnergyParams& p) {
  if (a.rows() < 1 || b.rows() < 1) {
    throw InvalidInput("energy_statistic: empty sample");
  }
  if (a.cols() != b.cols()) {
    throw InvalidInput("energy_statistic: feature count mismatch");
  }
  if (!(p.epsilon >= 0.0)) throw InvalidInput("energy_statistic: epsilon < 0");
  if (!(p.sigma > 0.0)) throw InvalidInput("energy_statistic: sigma <= 0");
  const double phi = energy_from_sums(
      energy_pair_sum(a, p), static_cast<double>(a.rows()), energy_pair_sum(b, p),
      static_cast<double>(b.rows()), energy_cross_sum(a, b, p));
  if (!std::isfinite(phi)) {
    throw InvalidInput(
        "energy_statistic: non-finite value (coincident points need epsilon > 0)");
  }
  return phi;
}

EnergyParams energy_params_for(const StatisticSpec& spec) {
  EnergyParams p;
  p.epsilon = spec.energy_epsilon;
  p.sigma = spec.gaussian_sigma;
  switch (spec.kind) {
    case StatisticKind::energy_log: p.weight = EnergyWeight::log; break;
    case StatisticKind::energy_inverse: p.weight = EnergyWeight::inverse; break;
    case StatisticKind::energy_gaussian: p.weight = EnergyWeight::gaussian; break;
    default:
      throw InvalidInput("energy_params_for: " + to_string(spec.kind) +
                         " is not an energy statistic");
  }
  return p;
}

std::vector<double> within_subset_nn_distances(const FeatureMatrix& subset) {
  const Index m = subset.rows();
  if (m < 2) {
    throw InvalidInput("nn_ratio_statistic: subset needs at least 2 rows");
  }
  std::vector<double> best(static_cast<std::size_t>(m),
                           std::numeric_limits<double>::infinity());
  const Index d = subset.cols();
  for (Index i = 0; i < m; ++i) {
    const double* xi = subset.row(i).data();
    for (Index j = i + 1; j < m; ++j) {
      const double d2 = squared_distance(xi, subset.row(j).data(), d);
      auto& bi = best[static_cast<std::size_t>(i)];
      auto& bj = best[static_cast<std::size_t>(j)];
      if (d2 < bi) bi = d2;
      if (d2 < bj) bj = d2;
    }
  }
  for (auto& v : best) v = std::sqrt(v);
  return best;
}

double nn_ratio_from_train_distances(const FeatureMatrix& subset,
                                     std::span<const double> train_distances,
                                     double epsilon) {
  if (static_cast<Index>(train_distances.size()) != subset.rows()) {
    throw InvalidInput("nn_ratio_statistic: one training distance per row required");
  }
  const auto self = within_subset_nn_distances(subset);
  double s = 0.0;
  for (std::size_t i = 0; i < self.size(); ++i) {
    s += std::log((train_distances[i] + epsilon) / (self[i] + epsilon));
  }
  return s / static_cast<double>(self.size());
}

double nn_ratio_statistic(const FeatureMatrix& subset, const NNIndex& index,
                          double epsilon) {
  if (subset.rows() < 2) {
    throw InvalidInput("nn_ratio_statistic: subset needs at least 2 rows");
  }
  if (subset.cols() != index.dimension()) {
    throw InvalidInput("nn_ratio_statistic: feature count mismatch");
  }
  std::vector<double> train_d(static_cast<std::size_t>(subset.rows()));
  for (Index i = 0; i < subset.rows(); ++i) {
    train_d[static_cast<std::size_t>(i)] = index.nearest(subset.row(i).data()).distance;
  }
  return nn_ratio_from_train_distances(subset, train_d, epsilon);
}

}  // namespace invbag
