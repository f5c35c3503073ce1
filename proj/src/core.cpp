#include "invbag/core.hpp"

#include <algorithm>

namespace invbag {

Index LabeledDataset::count(Label l) const {
  return static_cast<Index>(std::count(labels.begin(), labels.end(), l));
}

double LabeledDataset::background_fraction() const {
  if (labels.empty()) {
    throw InvalidInput("background_fraction: dataset has no events");
  }
  return static_cast<double>(count(Label::background)) /
         static_cast<double>(labels.size());
}

void LabeledDataset::validate() const {
  validate_features(features);
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw InvalidInput("labeled dataset has " + std::to_string(labels.size()) +
                       " labels for " + std::to_string(features.rows()) +
                       " events");
  }
}

}  // namespace invbag
