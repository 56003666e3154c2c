#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "storm/core.hpp"

namespace storm {

// Class-wise entropy of KNN density, in bits.
//
// For an instance x_i of class c, with Q(x_i) the k nearest same-class
// instances under Euclidean distance:
//
//   lambda(x_i) = (1/|Q|) * sum_j 1/dist(x_i, x_j)          density
//   gamma(x_i)  = lambda(x_i) / sum_{j in c} lambda(x_j)    class share
//   theta_c     = sum_{i in c} -gamma(x_i) * log2 gamma(x_i)
//   eta         = max_c theta_c - mean_c theta_c            imbalance
//
// theta_c is scale-free: scaling all features by s > 0 scales every lambda
// by 1/s and leaves gamma unchanged. Distances of zero (duplicate points)
// are clamped below by distance_floor to keep lambda finite.

struct DensityConfig {
  // Neighbor budget; every class effectively uses min(k, class size - 1).
  int k = 5;
  // Lower clamp applied to distances inside the density sum.
  double distance_floor = 1e-9;

  void validate() const;
};

struct EntropyReport {
  std::map<std::string, double> per_class_entropy;  // theta, bits
  double imbalance = 0.0;                           // eta, bits
  std::string source;                               // "raw:<view>" or a machine id
  std::map<std::string, std::size_t> class_counts;  // real instances per class
  std::uint64_t instance_fingerprint = 0;           // order-independent id digest
};

double euclidean_distance(const FeatureVector& a, const FeatureVector& b);

// One representation row per dataset instance, in dataset order. Synthetic
// instances without the source view get an empty row; every consumer here
// skips synthetic rows.
using Representations = std::vector<FeatureVector>;

Representations view_representations(const Dataset& dataset, const std::string& view);

// Indices of the same-class nearest neighbours of `target` (nearest first,
// at most k, excluding the target). Ties at equal distance resolve to the
// earlier dataset index. A singleton class yields an empty set.
std::vector<std::size_t> same_class_knn(const Dataset& dataset,
                                        const Representations& reps,
                                        std::size_t target,
                                        const DensityConfig& config);

// Eq. density for one instance given its neighbor set; an empty set maps to
// the maximal density 1/distance_floor.
double instance_density(const Representations& reps,
                        std::size_t target,
                        const std::vector<std::size_t>& neighbors,
                        const DensityConfig& config);

// Densities for all real instances, in dataset order (parallel kernel;
// results are identical to sequential evaluation). Synthetic rows get 0.
std::vector<double> instance_densities(const Dataset& dataset,
                                       const Representations& reps,
                                       const DensityConfig& config);

// Normalized within-class densities (gamma), per class in dataset order.
std::map<std::string, std::vector<double>> class_gammas(const Dataset& dataset,
                                                        const Representations& reps,
                                                        const DensityConfig& config);

// Entropy of one class given its members' densities (normalizes internally).
double entropy_from_densities(const std::vector<double>& densities);

EntropyReport class_entropy(const Dataset& dataset,
                            const Representations& reps,
                            const DensityConfig& config,
                            std::string source);

// eta = max theta - mean theta over classes; 0 for a single class.
double entropy_imbalance(const std::map<std::string, double>& per_class_entropy);

// EIG = eta_raw - eta_machine. Both reports must describe the same instance
// and class sets.
double entropy_imbalance_gain(const EntropyReport& raw, const EntropyReport& machine);

std::uint64_t instance_fingerprint(const Dataset& dataset);

}  // namespace storm
