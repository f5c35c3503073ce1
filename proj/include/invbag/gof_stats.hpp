#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "invbag/core.hpp"
#include "invbag/nn_index.hpp"

// Two-sample statistics comparing a small subset with the background training
// sample. All of them are oriented so that a larger value means the subset is
// less compatible with the background.

namespace invbag {

enum class StatisticKind {
  ks,
  ad,
  energy_log,
  energy_inverse,
  energy_gaussian,
  nn_ratio,
};

/// How one-dimensional statistics are merged across features.
enum class Combine { max, mean };

enum class EnergyWeight { log, inverse, gaussian };

inline constexpr double kDefaultEnergyEpsilon = 1e-9;
inline constexpr double kDefaultGaussianSigma = 1.0;
inline constexpr double kDefaultNNEpsilon = 0.1;

struct StatisticSpec {
  StatisticKind kind = StatisticKind::nn_ratio;
  Combine combine = Combine::max;  // KS and AD only
  double energy_epsilon = kDefaultEnergyEpsilon;
  double gaussian_sigma = kDefaultGaussianSigma;
  double nn_epsilon = kDefaultNNEpsilon;

  /// Throws InvalidInput on non-positive regularizers.
  void validate() const;
};

std::string to_string(StatisticKind k);
std::string to_string(Combine c);
/// Accepts ks|ad|energy-log|energy-inv|energy-gauss|nnratio.
StatisticKind parse_statistic_kind(std::string_view s);
Combine parse_combine(std::string_view s);
bool is_one_dimensional(StatisticKind k);

// -- one-dimensional tests ----------------------------------------------------

/// sup_x |F_a(x) - F_b(x)| evaluated exactly on the merged sample.
double ks_two_sample(std::span<const double> a, std::span<const double> b);
/// Same as ks_two_sample for inputs already sorted ascending.
double ks_sorted(std::span<const double> a, std::span<const double> b);

/// Two-sample Anderson-Darling statistic in the k-sample rank form of Scholz
/// and Stephens, midrank version (A2_akN) with k = 2. Identical samples give 0;
/// distinct values whose denominator vanishes (all observations tied)
/// contribute nothing.
double ad_two_sample(std::span<const double> a, std::span<const double> b);
double ad_sorted(std::span<const double> a, std::span<const double> b);

double combine_per_feature(std::span<const double> per_feature, Combine mode);

/// Applies a one-dimensional test to every column and combines the results.
/// `kind` must be ks or ad.
double per_feature_statistic(const FeatureMatrix& a, const FeatureMatrix& b,
                             StatisticKind kind, Combine mode);

// -- energy test --------------------------------------------------------------

struct EnergyParams {
  EnergyWeight weight = EnergyWeight::log;
  double epsilon = kDefaultEnergyEpsilon;
  double sigma = kDefaultGaussianSigma;
};

/// R(d): -ln(d + eps), 1/(d + eps) or exp(-d^2 / (2 sigma^2)).
inline double energy_weight(double d, const EnergyParams& p) {
  switch (p.weight) {
    case EnergyWeight::log:
      return -std::log(d + p.epsilon);
    case EnergyWeight::inverse:
      return 1.0 / (d + p.epsilon);
    case EnergyWeight::gaussian:
      return std::exp(-(d * d) / (2.0 * p.sigma * p.sigma));
  }
  return 0.0;
}

/// Sum of R(d_ij) over unordered pairs i < j within one sample.
double energy_pair_sum(const FeatureMatrix& a, const EnergyParams& p);
/// Sum of R(d_ij) over all pairs (i in a, j in b).
double energy_cross_sum(const FeatureMatrix& a, const FeatureMatrix& b,
                        const EnergyParams& p);

/// Assembles phi from its three pair sums for sample sizes n and m.
inline double energy_from_sums(double within_a, double n, double within_b,
                               double m, double cross) {
  return within_a / (n * n) + within_b / (m * m) - cross / (n * m);
}

double energy_statistic(const FeatureMatrix& a, const FeatureMatrix& b,
                        const EnergyParams& p);

/// Expression-friendly overload: operands are evaluated once into row-major
/// storage.
template <typename DA, typename DB>
double energy_statistic(const Eigen::MatrixBase<DA>& a,
                        const Eigen::MatrixBase<DB>& b,
                        const EnergyParams& p = {}) {
  return energy_statistic(FeatureMatrix(a), FeatureMatrix(b), p);
}

EnergyParams energy_params_for(const StatisticSpec& spec);

// -- nearest-neighbour ratio --------------------------------------------------

/// Distance from each subset row to its nearest other subset row. Duplicated
/// rows get 0.
std::vector<double> within_subset_nn_distances(const FeatureMatrix& subset);

/// T = mean over subset rows of ln((d_train + eps) / (d_self + eps)), given the
/// nearest-training-point distance of every subset row.
double nn_ratio_from_train_distances(const FeatureMatrix& subset,
                                     std::span<const double> train_distances,
                                     double epsilon);

/// NN-ratio statistic of `subset` against the training sample held by `index`.
double nn_ratio_statistic(const FeatureMatrix& subset, const NNIndex& index,
                          double epsilon = kDefaultNNEpsilon);

}  // namespace invbag
