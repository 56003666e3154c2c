#include "storm/purity.hpp"

namespace storm {

PartitionPurity gini_index(const std::vector<std::string>& labels) {
  if (labels.empty()) {
    throw InputError("gini index of an empty label collection");
  }
  PartitionPurity purity;
  for (const auto& label : labels) {
    ++purity.counts[label];
  }
  const double total = static_cast<double>(labels.size());
  double sum_sq = 0.0;
  for (const auto& [label, count] : purity.counts) {
    (void)label;
    const double p = static_cast<double>(count) / total;
    sum_sq += p * p;
  }
  purity.gini = 1.0 - sum_sq;
  return purity;
}

}  // namespace storm
