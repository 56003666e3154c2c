#include "storm/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace storm {

std::optional<std::size_t> OriginalClassSet::index_of(const std::string& cls) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == cls) {
      return i;
    }
  }
  return std::nullopt;
}

void OriginalClassSet::validate() const {
  if (classes.size() < 2) {
    throw InputError("class set needs at least 2 classes, got " +
                     std::to_string(classes.size()));
  }
  std::set<std::string> seen;
  for (const auto& cls : classes) {
    if (!seen.insert(cls).second) {
      throw InputError("duplicate class identifier '" + cls + "'");
    }
  }
  if (!contains(rare_class)) {
    throw InputError("rare class '" + rare_class + "' is not in the class set");
  }
}

const FeatureVector& Instance::view(const std::string& name) const {
  auto it = views.find(name);
  if (it == views.end()) {
    throw InputError("instance '" + id + "' has no view '" + name + "'");
  }
  return it->second;
}

Dataset::Dataset(OriginalClassSet class_set, std::vector<Instance> instances)
    : class_set_(std::move(class_set)), instances_(std::move(instances)) {
  class_set_.validate();
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const Instance& inst = instances_[i];
    if (!id_to_index_.emplace(inst.id, i).second) {
      throw InputError("duplicate instance id '" + inst.id + "'");
    }
    if (!class_set_.contains(inst.label)) {
      throw InputError("instance '" + inst.id + "' has unknown label '" +
                       inst.label + "'");
    }
    for (const auto& [name, values] : inst.views) {
      for (double v : values) {
        if (!std::isfinite(v)) {
          throw InputError("instance '" + inst.id + "' has a non-finite value in view '" +
                           name + "'");
        }
      }
      auto [it, inserted] = view_dims_.emplace(name, values.size());
      if (!inserted && it->second != values.size()) {
        throw InputError("instance '" + inst.id + "' has view '" + name + "' of dimension " +
                         std::to_string(values.size()) + ", expected " +
                         std::to_string(it->second));
      }
    }
  }
  // Real instances must agree on the full view list.
  for (const Instance& inst : instances_) {
    if (inst.synthetic) {
      continue;
    }
    if (inst.views.size() != view_dims_.size()) {
      for (const auto& [name, dim] : view_dims_) {
        (void)dim;
        if (!inst.has_view(name)) {
          throw InputError("instance '" + inst.id + "' is missing view '" + name + "'");
        }
      }
    }
  }
}

std::optional<std::size_t> Dataset::index_of(const std::string& id) const {
  auto it = id_to_index_.find(id);
  if (it == id_to_index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::map<std::string, std::size_t> Dataset::class_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const Instance& inst : instances_) {
    if (!inst.synthetic) {
      ++counts[inst.label];
    }
  }
  return counts;
}

std::size_t Dataset::class_count(const std::string& cls) const {
  std::size_t count = 0;
  for (const Instance& inst : instances_) {
    if (!inst.synthetic && inst.label == cls) {
      ++count;
    }
  }
  return count;
}

std::size_t Dataset::real_count() const {
  std::size_t count = 0;
  for (const Instance& inst : instances_) {
    if (!inst.synthetic) {
      ++count;
    }
  }
  return count;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Instance> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= instances_.size()) {
      throw InternalError("subset index out of range");
    }
    picked.push_back(instances_[i]);
  }
  return Dataset(class_set_, std::move(picked));
}

Dataset Dataset::subset_by_ids(const std::vector<std::string>& ids) const {
  std::set<std::string> wanted(ids.begin(), ids.end());
  if (wanted.size() != ids.size()) {
    throw InputError("subset id list contains duplicates");
  }
  std::vector<std::size_t> indices;
  indices.reserve(ids.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (wanted.count(instances_[i].id) != 0) {
      indices.push_back(i);
      wanted.erase(instances_[i].id);
    }
  }
  if (!wanted.empty()) {
    throw InputError("subset id '" + *wanted.begin() + "' not found in dataset");
  }
  return subset(indices);
}

Dataset Dataset::with_rare_class(const std::string& rare) const {
  OriginalClassSet cs = class_set_;
  cs.rare_class = rare;
  return Dataset(std::move(cs), instances_);
}

LabelPartition LabelPartition::identity(const OriginalClassSet& class_set) {
  LabelPartition partition;
  for (const auto& cls : class_set.classes) {
    partition.blocks.push_back({cls});
  }
  return partition;
}

LabelPartition LabelPartition::single_block(const OriginalClassSet& class_set) {
  LabelPartition partition;
  partition.blocks.push_back(class_set.classes);
  return partition;
}

std::optional<std::size_t> LabelPartition::block_of(const std::string& label) const {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (std::find(blocks[b].begin(), blocks[b].end(), label) != blocks[b].end()) {
      return b;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> LabelPartition::exact_block(const std::string& label) const {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].size() == 1 && blocks[b][0] == label) {
      return b;
    }
  }
  return std::nullopt;
}

std::vector<std::string> LabelPartition::covered_classes() const {
  std::set<std::string> covered;
  for (const auto& block : blocks) {
    covered.insert(block.begin(), block.end());
  }
  return {covered.begin(), covered.end()};
}

std::string LabelPartition::describe() const {
  std::ostringstream out;
  out << "{";
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out << (b == 0 ? "{" : ", {");
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      out << (i == 0 ? "" : ", ") << blocks[b][i];
    }
    out << "}";
  }
  out << "}";
  return out.str();
}

const char* criterion_name(PartitionCriterion criterion) {
  switch (criterion) {
    case PartitionCriterion::valid: return "valid";
    case PartitionCriterion::empty_block: return "empty block";
    case PartitionCriterion::unknown_class: return "not formed from original labels";
    case PartitionCriterion::overlap: return "not mutually exclusive";
    case PartitionCriterion::not_exhaustive: return "not exhaustive";
  }
  return "?";
}

namespace {

PartitionVerdict check_partition(const LabelPartition& partition,
                                 const OriginalClassSet& class_set,
                                 bool require_exhaustive) {
  PartitionVerdict verdict;
  if (partition.blocks.empty()) {
    verdict.criterion = PartitionCriterion::not_exhaustive;
    verdict.detail = "partition has no blocks";
    return verdict;
  }
  std::set<std::string> seen;
  for (std::size_t b = 0; b < partition.blocks.size(); ++b) {
    const auto& block = partition.blocks[b];
    if (block.empty()) {
      verdict.criterion = PartitionCriterion::empty_block;
      verdict.detail = "block " + std::to_string(b) + " is empty";
      return verdict;
    }
    for (const auto& cls : block) {
      if (!class_set.contains(cls)) {
        verdict.criterion = PartitionCriterion::unknown_class;
        verdict.detail = "block " + std::to_string(b) + " mentions unknown class '" + cls + "'";
        return verdict;
      }
      if (!seen.insert(cls).second) {
        verdict.criterion = PartitionCriterion::overlap;
        verdict.detail = "class '" + cls + "' appears in more than one place";
        return verdict;
      }
    }
  }
  if (require_exhaustive) {
    for (const auto& cls : class_set.classes) {
      if (seen.count(cls) == 0) {
        verdict.criterion = PartitionCriterion::not_exhaustive;
        verdict.detail = "class '" + cls + "' is not covered by any block";
        return verdict;
      }
    }
  }
  verdict.valid = true;
  verdict.criterion = PartitionCriterion::valid;
  return verdict;
}

}  // namespace

PartitionVerdict validate_partition(const LabelPartition& partition,
                                    const OriginalClassSet& class_set) {
  return check_partition(partition, class_set, /*require_exhaustive=*/true);
}

PartitionVerdict validate_partition_subset(const LabelPartition& partition,
                                           const OriginalClassSet& class_set) {
  return check_partition(partition, class_set, /*require_exhaustive=*/false);
}

std::vector<std::size_t> coarsen_labels(const Dataset& dataset,
                                        const LabelPartition& partition) {
  const PartitionVerdict verdict = validate_partition(partition, dataset.class_set());
  if (!verdict.valid) {
    throw InputError(std::string("invalid partition (") + criterion_name(verdict.criterion) +
                     "): " + verdict.detail);
  }
  std::vector<std::size_t> blocks;
  blocks.reserve(dataset.size());
  for (const Instance& inst : dataset.instances()) {
    blocks.push_back(*partition.block_of(inst.label));
  }
  return blocks;
}

}  // namespace storm
