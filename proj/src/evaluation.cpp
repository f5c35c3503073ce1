#include "invbag/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invbag {

double PurityEfficiencyCurve::purity_at(double e) const {
  if (points.empty()) throw InvalidInput("purity_at: empty curve");
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].efficiency >= e) {
      if (k == 0 || points[k].efficiency == e) return points[k].purity;
      const auto& a = points[k - 1];
      const auto& b = points[k];
      const double t = (e - a.efficiency) / (b.efficiency - a.efficiency);
      return a.purity + t * (b.purity - a.purity);
    }
  }
  return points.back().purity;
}

PurityEfficiencyCurve purity_efficiency_curve(const Eigen::VectorXd& scores,
                                              std::span<const Label> labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    throw InvalidInput("purity_efficiency_curve: scores and labels differ in length");
  }
  if (std::any_of(scores.begin(), scores.end(), [](double v) { return std::isnan(v); })) {
    throw InvalidInput("purity_efficiency_curve: NaN score");
  }
  PurityEfficiencyCurve c;
  c.n_events = scores.size();
  c.n_signal = std::count(labels.begin(), labels.end(), Label::signal);
  if (c.n_signal == 0 || c.n_signal == c.n_events) {
    throw InvalidInput("purity_efficiency_curve: labels must contain both classes");
  }

  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return scores(a) > scores(b); });

  Index kept = 0, kept_signal = 0;
  const double total_signal = static_cast<double>(c.n_signal);
  for (std::size_t i = 0; i < order.size();) {
    const double theta = scores(order[i]);
    while (i < order.size() && scores(order[i]) == theta) {
      ++kept;
      if (labels[static_cast<std::size_t>(order[i])] == Label::signal) ++kept_signal;
      ++i;
    }
    c.points.push_back({theta, static_cast<double>(kept_signal) / total_signal,
                        static_cast<double>(kept_signal) / static_cast<double>(kept)});
  }

  double area = c.points.front().efficiency * c.points.front().purity;
  for (std::size_t k = 1; k < c.points.size(); ++k) {
    const auto& a = c.points[k - 1];
    const auto& b = c.points[k];
    area += 0.5 * (b.efficiency - a.efficiency) * (a.purity + b.purity);
  }
  c.area = area;
  return c;
}

PurityEfficiencyCurve purity_efficiency_curve(const ScoreVector& scores,
                                              std::span<const Label> labels) {
  return purity_efficiency_curve(scores.score, labels);
}

double subset_separation(std::span<const double> null_values,
                         std::span<const double> mixed_values) {
  if (null_values.empty() || mixed_values.empty()) {
    throw InvalidInput("subset_separation: both samples must be nonempty");
  }
  std::vector<double> null_sorted(null_values.begin(), null_values.end());
  std::sort(null_sorted.begin(), null_sorted.end());
  // Count pairs through binary search so large samples stay O((n + m) log n).
  double wins = 0.0;
  for (double v : mixed_values) {
    const auto lo = std::lower_bound(null_sorted.begin(), null_sorted.end(), v);
    const auto hi = std::upper_bound(lo, null_sorted.end(), v);
    wins += static_cast<double>(lo - null_sorted.begin()) +
            0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(null_sorted.size()) *
                 static_cast<double>(mixed_values.size()));
}

DominanceTable curve_dominance_report(const std::vector<NamedCurve>& curves) {
  if (curves.size() < 2) {
    throw InvalidInput("curve_dominance_report: need at least two curves");
  }
  const auto& first = curves.front().second;
  DominanceTable t;
  for (int i = 1; i <= 10; ++i) t.efficiency_grid.push_back(i / 10.0);
  for (const auto& [name, curve] : curves) {
    if (curve.n_events != first.n_events || curve.n_signal != first.n_signal) {
      throw InvalidInput("curve_dominance_report: curve '" + name +
                         "' was built on a different sample");
    }
    t.names.push_back(name);
    std::vector<double> row;
    for (double e : t.efficiency_grid) row.push_back(curve.purity_at(e));
    t.purity.push_back(std::move(row));
    t.areas.push_back(curve.area);
  }
  return t;
}

double mean_grid_purity(const PurityEfficiencyCurve& curve) {
  double s = 0.0;
  for (int i = 1; i <= 9; ++i) s += curve.purity_at(i / 10.0);
  return s / 9.0;
}

}  // namespace invbag
