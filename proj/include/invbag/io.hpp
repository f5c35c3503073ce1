#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "invbag/core.hpp"

namespace invbag {

/// Which columns of a CSV file hold the label and the features.
///
/// Header names are compared after trimming whitespace and a leading '#', so
/// the HEPMASS header cell "# label" matches "label".
struct CsvSchema {
  std::string label_column = "label";
  double background_value = 0.0;
  double signal_value = 1.0;
  /// Empty selects every column except the label, in file order.
  std::vector<std::string> features;
  char delimiter = ',';

  void validate() const;

  /// Label plus the first eight low-level HEPMASS columns (f0..f7), which
  /// contain no b-tagging discriminator.
  static CsvSchema hepmass();
};

/// A required column is missing from the header.
class SchemaError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// A data row could not be parsed. `line()` is 1-based and counts the header.
class CsvParseError : public InvalidInput {
 public:
  CsvParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct LoadedCsv {
  LabeledDataset data;
  std::vector<std::string> feature_names;
};

LoadedCsv load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Writes a header row then one row per event: label first, then features,
/// every number with 17 significant digits and '\n' line endings.
void save_csv(const std::filesystem::path& path, const LabeledDataset& data,
              const std::vector<std::string>& feature_names,
              const CsvSchema& schema = {});

/// Default names f0, f1, ... for unnamed features.
std::vector<std::string> default_feature_names(Index n);

/// round-half-up(bg_fraction * n_test).
Index background_count(Index n_test, double bg_fraction);

/// Draws the background and signal events of a test sample without
/// replacement and shuffles them deterministically.
LabeledDataset compose_test_sample(const FeatureMatrix& bg_pool,
                                   const FeatureMatrix& sig_pool, Index n_test,
                                   double bg_fraction, std::uint64_t seed);

/// Rows of `m` chosen without replacement, in random order.
SubsetIndex sample_without_replacement(Index n, Index k, std::uint64_t seed);

// -- synthetic Gaussian oracle --------------------------------------------------

/// Background N(0, I_d), signal N(shift, I_d).
struct SyntheticSpec {
  Eigen::VectorXd shift;
  std::uint64_t seed = 0;

  Index n_features() const { return shift.size(); }
  static SyntheticSpec uniform_shift(Index d, double delta, std::uint64_t seed);
};

struct SyntheticSample {
  FeatureMatrix background;
  FeatureMatrix signal;  // may have zero rows
};

SyntheticSample generate_synthetic(const SyntheticSpec& spec, Index n_background,
                                   Index n_signal);

}  // namespace invbag
