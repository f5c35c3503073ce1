#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "invbag/core.hpp"
#include "invbag/engine.hpp"

namespace invbag {

struct CurvePoint {
  double threshold = 0.0;
  double efficiency = 0.0;  // kept signal / total signal
  double purity = 0.0;      // kept signal / kept events
};

/// Signal purity versus signal efficiency as the score cut is lowered.
///
/// Points are ordered by descending threshold; the last point keeps every
/// event. `area` integrates purity over efficiency by trapezoids, with the
/// first point's purity extended flat down to efficiency 0.
struct PurityEfficiencyCurve {
  std::vector<CurvePoint> points;
  double area = 0.0;
  Index n_events = 0;
  Index n_signal = 0;

  /// Purity at efficiency `e`, interpolated linearly in efficiency along the
  /// sweep. Where several points share an efficiency the first one reached
  /// (highest threshold) is used.
  double purity_at(double e) const;
  double signal_fraction() const {
    return static_cast<double>(n_signal) / static_cast<double>(n_events);
  }
};

/// Events with equal scores enter the kept set together.
PurityEfficiencyCurve purity_efficiency_curve(const Eigen::VectorXd& scores,
                                              std::span<const Label> labels);
PurityEfficiencyCurve purity_efficiency_curve(const ScoreVector& scores,
                                              std::span<const Label> labels);

/// P(mixed > null) + P(mixed == null) / 2 over all value pairs.
double subset_separation(std::span<const double> null_values,
                         std::span<const double> mixed_values);

struct DominanceTable {
  std::vector<double> efficiency_grid;                    // 0.1, 0.2, ..., 1.0
  std::vector<std::string> names;
  std::vector<std::vector<double>> purity;                // [curve][grid point]
  std::vector<double> areas;
};

using NamedCurve = std::pair<std::string, PurityEfficiencyCurve>;

/// Purity of each curve on the efficiency grid plus each area. Curves must come
/// from the same labeled sample.
DominanceTable curve_dominance_report(const std::vector<NamedCurve>& curves);

/// Mean of purity_at over efficiencies 0.1, 0.2, ..., 0.9.
double mean_grid_purity(const PurityEfficiencyCurve& curve);

}  // namespace invbag
