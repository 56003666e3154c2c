#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "storm/core.hpp"

namespace storm {

// Synthetic minority oversampling: new points are convex combinations
// x + u * (nn - x) between a minority instance and one of its k nearest
// minority neighbours, u uniform in [0, 1).
struct SmoteConfig {
  // 0 = auto: min(5, minority count - 1).
  int k_smote = 0;
  // 0 = auto: the largest class count in the dataset.
  std::size_t target_count = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticRecord {
  std::string id;
  std::string parent_a;  // base minority instance
  std::string parent_b;  // chosen neighbour
  double u = 0.0;
};

struct SmoteResult {
  Dataset augmented;
  std::vector<SyntheticRecord> synthetics;
};

// Oversamples `minority_class` in `view` until it reaches the target count.
// Synthetic instances carry fresh ids, the synthetic flag, and only the
// interpolated view; all other instances and their order are unchanged.
SmoteResult smote_oversample(const Dataset& dataset,
                             const std::string& minority_class,
                             const std::string& view,
                             const SmoteConfig& config);

}  // namespace storm
