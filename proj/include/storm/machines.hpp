#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "storm/core.hpp"
#include "storm/resample.hpp"

namespace storm {

using Json = nlohmann::ordered_json;

// A trainable classifier bound to one modality view and a coarsened label
// partition. Built-in kinds:
//
//   nearest_centroid  one centroid per block; scores are a softmin over
//                     centroid distances with a scale-free temperature
//                     (mean pairwise centroid distance * temperature_factor)
//   knn               majority vote over the k nearest training points with
//                     inverse-distance weights
//   linear            one-vs-rest logistic scorers fitted by full-batch
//                     gradient descent on standardized features
//   identity          centroid predictions, but the representation is the
//                     raw view itself (baseline for assessment tables)
//
// A machine's partition may cover a subset of the original classes; training
// instances with uncovered labels are excluded and counted.

struct MachineSpec {
  std::string id;
  std::string view;
  std::string kind;
  LabelPartition partition;
  std::map<std::string, double> hyperparameters;
  std::optional<SmoteConfig> smote;
};

struct Prediction {
  std::size_t block = 0;
  double score = 0.0;  // in [0, 1], the machine's confidence in that block
};

struct TrainingSummary {
  std::map<std::string, std::size_t> class_counts;  // covered real instances
  std::vector<std::size_t> block_counts;            // training rows per block
  std::size_t excluded_uncovered = 0;
  std::size_t synthetic_added = 0;
  bool smote_skipped = false;  // minority too small to interpolate
  // mean inter-class distance - mean intra-class distance of the chosen
  // representation over the real training instances
  double discriminative_score = 0.0;
};

class TrainedMachine {
 public:
  virtual ~TrainedMachine() = default;

  const MachineSpec& spec() const { return spec_; }
  const TrainingSummary& summary() const { return summary_; }
  std::size_t block_count() const { return spec_.partition.blocks.size(); }

  // Majority original training class per block (coarse when the block spans
  // more than one class); used to map terminal block predictions back to
  // original labels.
  const std::vector<std::string>& block_majority_class() const { return block_majority_; }
  bool block_is_coarse(std::size_t block) const {
    return spec_.partition.blocks.at(block).size() > 1;
  }

  // Per-block scores summing to 1.
  std::vector<double> block_scores(const Instance& instance) const;
  Prediction predict(const Instance& instance) const;
  // The machine's discriminative embedding of an instance.
  FeatureVector representation(const Instance& instance) const;

  Json to_json() const;
  static std::unique_ptr<TrainedMachine> from_json(const Json& j);

 protected:
  virtual std::vector<double> scores_for(const FeatureVector& features) const = 0;
  virtual FeatureVector representation_for(const FeatureVector& features) const = 0;
  virtual Json parameters_json() const = 0;

  const FeatureVector& input_for(const Instance& instance) const;

  MachineSpec spec_;
  TrainingSummary summary_;
  std::vector<std::string> block_majority_;

  friend std::unique_ptr<TrainedMachine> train(const MachineSpec&, const Dataset&);
};

std::unique_ptr<TrainedMachine> train(const MachineSpec& spec, const Dataset& train_data);

// Mean over real validation instances of the score the machine assigns to
// the block containing the instance's true label; labels the partition does
// not cover contribute 0. A single dependability scalar compared against
// the d_th threshold.
double confidence(const TrainedMachine& machine, const Dataset& validation);

// mean inter-class distance - mean intra-class distance of representation
// rows grouped by class id; 0 when a grouping has no pairs.
double discriminative_score(const std::vector<FeatureVector>& reps,
                            const std::vector<std::size_t>& class_ids);

// Representation rows for a dataset, aligned with instance order. Synthetic
// instances without the machine's view get an empty row.
std::vector<FeatureVector> machine_representations(const TrainedMachine& machine,
                                                   const Dataset& dataset);

Json machine_spec_to_json(const MachineSpec& spec);
MachineSpec machine_spec_from_json(const Json& j);

}  // namespace storm
