#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace invbag {

/// Raised when an argument violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Index = Eigen::Index;

/// Events are rows, features are columns.
template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using FeatureMatrix = RowMatrix<double>;

/// Row indices into a FeatureMatrix; duplicates are allowed.
using SubsetIndex = std::vector<Index>;

enum class Label : std::uint8_t { background = 0, signal = 1 };

/// Throws InvalidInput unless `m` is nonempty and every entry is finite.
template <typename Derived>
void validate_features(const Eigen::MatrixBase<Derived>& m,
                       const char* what = "feature matrix") {
  if (m.rows() < 1 || m.cols() < 1) {
    throw InvalidInput(std::string(what) + " must have at least one row and one column");
  }
  if (!m.allFinite()) {
    throw InvalidInput(std::string(what) + " contains non-finite values");
  }
}

struct LabeledDataset {
  FeatureMatrix features;
  std::vector<Label> labels;

  Index n_events() const { return features.rows(); }
  Index n_features() const { return features.cols(); }
  Index count(Label l) const;
  /// Fraction of background events in [0, 1].
  double background_fraction() const;
  /// Throws InvalidInput if labels and features disagree in length.
  void validate() const;
};

template <typename Scalar>
struct ScalingParams {
  Vector<Scalar> mean;
  Vector<Scalar> sd;

  Index size() const { return mean.size(); }
};

/// Per-column mean and sample standard deviation (n-1 denominator).
/// Constant columns, and all columns of a single-row matrix, get sd = 1.
template <typename Derived>
ScalingParams<typename Derived::Scalar> fit_scaling(
    const Eigen::MatrixBase<Derived>& train) {
  using Scalar = typename Derived::Scalar;
  if (train.rows() < 1 || train.cols() < 1) {
    throw InvalidInput("fit_scaling: empty training matrix");
  }
  ScalingParams<Scalar> p;
  p.mean = train.colwise().mean().transpose();
  p.sd.resize(train.cols());
  const Index n = train.rows();
  for (Index j = 0; j < train.cols(); ++j) {
    Scalar ss = 0;
    for (Index i = 0; i < n; ++i) {
      const Scalar dev = train(i, j) - p.mean(j);
      ss += dev * dev;
    }
    const Scalar sd = n > 1 ? std::sqrt(ss / Scalar(n - 1)) : Scalar(0);
    p.sd(j) = (sd > Scalar(0) && std::isfinite(sd)) ? sd : Scalar(1);
  }
  return p;
}

/// (x - mean) / sd, column by column.
template <typename Derived>
RowMatrix<typename Derived::Scalar> apply_scaling(
    const Eigen::MatrixBase<Derived>& m,
    const ScalingParams<typename Derived::Scalar>& p) {
  if (m.cols() != p.size()) {
    throw InvalidInput("apply_scaling: matrix has " + std::to_string(m.cols()) +
                       " features but scaling has " + std::to_string(p.size()));
  }
  RowMatrix<typename Derived::Scalar> out =
      (m.rowwise() - p.mean.transpose()).array().rowwise() /
      p.sd.transpose().array();
  return out;
}

template <typename Derived>
RowMatrix<typename Derived::Scalar> unscale(
    const Eigen::MatrixBase<Derived>& m,
    const ScalingParams<typename Derived::Scalar>& p) {
  if (m.cols() != p.size()) {
    throw InvalidInput("unscale: dimension mismatch");
  }
  RowMatrix<typename Derived::Scalar> out =
      (m.array().rowwise() * p.sd.transpose().array()).matrix().rowwise() +
      p.mean.transpose();
  return out;
}

/// Row j of the result is row `rows[j]` of `m`.
template <typename Derived>
RowMatrix<typename Derived::Scalar> gather(const Eigen::MatrixBase<Derived>& m,
                                           const SubsetIndex& rows) {
  RowMatrix<typename Derived::Scalar> out(static_cast<Index>(rows.size()),
                                          m.cols());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const Index r = rows[j];
    if (r < 0 || r >= m.rows()) {
      throw InvalidInput("gather: index " + std::to_string(r) +
                         " out of range for " + std::to_string(m.rows()) +
                         " events");
    }
    out.row(static_cast<Index>(j)) = m.row(r);
  }
  return out;
}

/// Squared Euclidean distance accumulated in feature order. Every distance in
/// the library goes through here so that different search paths agree bit for
/// bit.
inline double squared_distance(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

inline double row_distance(const FeatureMatrix& a, Index i, const FeatureMatrix& b,
                           Index j) {
  return std::sqrt(squared_distance(a.row(i).data(), b.row(j).data(), a.cols()));
}

}  // namespace invbag
