#pragma once

#include <map>
#include <string>
#include <vector>

#include "storm/common.hpp"

namespace storm {

// Gini impurity of a label collection: 1 - sum_c p_c^2 with p_c the class
// shares. 0 when one class holds everything, at most 1 - 1/m for m classes.
struct PartitionPurity {
  double gini = 0.0;
  std::map<std::string, std::size_t> counts;
};

PartitionPurity gini_index(const std::vector<std::string>& labels);

}  // namespace storm
