#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "storm/common.hpp"

namespace storm {

using FeatureVector = std::vector<double>;

// The original label alphabet with one class designated rare. Identifiers are
// compared exactly (case-sensitive).
struct OriginalClassSet {
  std::vector<std::string> classes;
  std::string rare_class;

  std::optional<std::size_t> index_of(const std::string& cls) const;
  bool contains(const std::string& cls) const { return index_of(cls).has_value(); }
  void validate() const;
};

struct Instance {
  std::string id;
  std::string label;
  std::map<std::string, FeatureVector> views;
  // SMOTE products: used for fitting only, carry a single view, and are
  // skipped by entropy metrics, splits and evaluation.
  bool synthetic = false;

  bool has_view(const std::string& name) const { return views.count(name) != 0; }
  const FeatureVector& view(const std::string& name) const;
};

// Labeled instances over a fixed class set. Immutable after construction;
// construction validates labels, id uniqueness, value finiteness and
// per-view dimension consistency. Real (non-synthetic) instances must all
// carry the same views; synthetic ones may carry a subset. Instance order is
// preserved from ingestion and acts as the tie-break order everywhere a
// deterministic order is needed.
class Dataset {
 public:
  Dataset(OriginalClassSet class_set, std::vector<Instance> instances);

  const OriginalClassSet& class_set() const { return class_set_; }
  const std::vector<Instance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }

  // View name -> dimension, for views carried by real instances.
  const std::map<std::string, std::size_t>& view_dims() const { return view_dims_; }
  bool has_view(const std::string& name) const { return view_dims_.count(name) != 0; }

  std::optional<std::size_t> index_of(const std::string& id) const;

  // Real instances per class.
  std::map<std::string, std::size_t> class_counts() const;
  std::size_t class_count(const std::string& cls) const;
  std::size_t real_count() const;

  Dataset subset(const std::vector<std::size_t>& indices) const;
  // Keeps dataset order; every id must exist.
  Dataset subset_by_ids(const std::vector<std::string>& ids) const;
  Dataset with_rare_class(const std::string& rare) const;

 private:
  OriginalClassSet class_set_;
  std::vector<Instance> instances_;
  std::map<std::string, std::size_t> view_dims_;
  std::map<std::string, std::size_t> id_to_index_;
};

// A coarsening of the original classes into blocks, each a union of original
// labels.
struct LabelPartition {
  std::vector<std::vector<std::string>> blocks;

  static LabelPartition identity(const OriginalClassSet& class_set);
  static LabelPartition single_block(const OriginalClassSet& class_set);

  std::optional<std::size_t> block_of(const std::string& label) const;
  bool covers(const std::string& label) const { return block_of(label).has_value(); }
  // Index of the block that is exactly {label}, if any.
  std::optional<std::size_t> exact_block(const std::string& label) const;
  std::vector<std::string> covered_classes() const;
  std::string describe() const;
};

enum class PartitionCriterion {
  valid,
  empty_block,
  unknown_class,    // a block mentions a label outside the class set
  overlap,          // blocks are not mutually exclusive
  not_exhaustive,   // the union of blocks misses a class
};

struct PartitionVerdict {
  bool valid = false;
  PartitionCriterion criterion = PartitionCriterion::valid;
  std::string detail;
};

const char* criterion_name(PartitionCriterion criterion);

// Checks the three partition criteria against a class set and reports the
// first violated one instead of throwing.
PartitionVerdict validate_partition(const LabelPartition& partition,
                                    const OriginalClassSet& class_set);

// Relaxed check for machine-scoped partitions: blocks must still be disjoint
// unions of known classes, but may cover only a subset of the class set.
// A machine trained under such a partition simply never sees the uncovered
// classes.
PartitionVerdict validate_partition_subset(const LabelPartition& partition,
                                           const OriginalClassSet& class_set);

// Maps every instance to the index of the block containing its label.
// Requires a fully valid partition; throws InputError naming the violated
// criterion otherwise.
std::vector<std::size_t> coarsen_labels(const Dataset& dataset,
                                        const LabelPartition& partition);

}  // namespace storm
