#pragma once

#include <map>
#include <string>
#include <vector>

#include "storm/selection.hpp"

namespace storm {
namespace oracle {

// Single-threaded brute-force references used to validate the main
// implementations. The entropy oracle shares only the distance function with
// the entropy module; everything else is recomputed literally from the
// defining formulas, with full sorts and no index structures.

// Per-class entropy by exhaustive computation. Limited to n <= 500.
std::map<std::string, double> oracle_entropy(const Dataset& dataset,
                                             const Representations& reps,
                                             const DensityConfig& config);

// Entropy of one class from given member densities, evaluated literally.
double oracle_entropy_from_densities(const std::vector<double>& densities);

double oracle_imbalance(const std::map<std::string, double>& per_class_entropy);

struct OracleSelection {
  std::vector<std::string> order;  // machine ids of the best sequence
  double f1 = 0.0;
  Cascade cascade;
};

// Exhaustive search over ordered machine sequences (with repetition, lengths
// 1..max_len), each realized with the same forced-order construction the
// greedy selector uses, scored by rare-class F1 on the validation split.
// Ties resolve to the earliest enumerated sequence. Limits: at most 4 specs
// and max_len <= 3.
OracleSelection oracle_best_subset(const Dataset& dataset,
                                   const Split& split,
                                   const std::vector<MachineSpec>& specs,
                                   const std::string& rare_class,
                                   const StormConfig& config,
                                   int max_len = 3);

}  // namespace oracle
}  // namespace storm
