#include "storm/entropy.hpp"

#include <algorithm>
#include <cmath>

namespace storm {

void DensityConfig::validate() const {
  if (k < 1) {
    throw InputError("density k must be >= 1, got " + std::to_string(k));
  }
  if (!(distance_floor > 0.0)) {
    throw InputError("distance_floor must be > 0");
  }
}

double euclidean_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size()) {
    throw InputError("distance between vectors of dimension " + std::to_string(a.size()) +
                     " and " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

Representations view_representations(const Dataset& dataset, const std::string& view) {
  if (!dataset.has_view(view)) {
    throw InputError("dataset has no view '" + view + "'");
  }
  Representations reps;
  reps.reserve(dataset.size());
  for (const Instance& inst : dataset.instances()) {
    if (inst.synthetic && !inst.has_view(view)) {
      reps.emplace_back();
    } else {
      reps.push_back(inst.view(view));
    }
  }
  return reps;
}

namespace {

// Members of each class (real instances only), in dataset order.
std::map<std::string, std::vector<std::size_t>> class_members(const Dataset& dataset) {
  std::map<std::string, std::vector<std::size_t>> members;
  const auto& instances = dataset.instances();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!instances[i].synthetic) {
      members[instances[i].label].push_back(i);
    }
  }
  return members;
}

std::vector<std::size_t> knn_among(const Representations& reps,
                                   std::size_t target,
                                   const std::vector<std::size_t>& candidates,
                                   std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dists;
  dists.reserve(candidates.size());
  for (std::size_t j : candidates) {
    if (j == target) {
      continue;
    }
    dists.emplace_back(euclidean_distance(reps[target], reps[j]), j);
  }
  const std::size_t take = std::min(k, dists.size());
  std::partial_sort(dists.begin(), dists.begin() + take, dists.end());
  std::vector<std::size_t> result;
  result.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    result.push_back(dists[r].second);
  }
  return result;
}

}  // namespace

std::vector<std::size_t> same_class_knn(const Dataset& dataset,
                                        const Representations& reps,
                                        std::size_t target,
                                        const DensityConfig& config) {
  config.validate();
  if (target >= dataset.size()) {
    throw InputError("target index " + std::to_string(target) + " out of range");
  }
  if (reps.size() != dataset.size()) {
    throw InputError("representations do not cover the dataset");
  }
  const std::string& label = dataset.instances()[target].label;
  std::vector<std::size_t> candidates;
  const auto& instances = dataset.instances();
  for (std::size_t j = 0; j < instances.size(); ++j) {
    if (!instances[j].synthetic && instances[j].label == label) {
      candidates.push_back(j);
    }
  }
  return knn_among(reps, target, candidates, static_cast<std::size_t>(config.k));
}

double instance_density(const Representations& reps,
                        std::size_t target,
                        const std::vector<std::size_t>& neighbors,
                        const DensityConfig& config) {
  if (neighbors.empty()) {
    // Singleton class: maximal density by convention.
    return 1.0 / config.distance_floor;
  }
  double sum = 0.0;
  for (std::size_t j : neighbors) {
    const double d = std::max(euclidean_distance(reps[target], reps[j]), config.distance_floor);
    sum += 1.0 / d;
  }
  return sum / static_cast<double>(neighbors.size());
}

std::vector<double> instance_densities(const Dataset& dataset,
                                       const Representations& reps,
                                       const DensityConfig& config) {
  config.validate();
  if (reps.size() != dataset.size()) {
    throw InputError("representations do not cover the dataset");
  }
  const auto members = class_members(dataset);
  const std::size_t k = static_cast<std::size_t>(config.k);

  std::vector<double> densities(dataset.size(), 0.0);
  // One flat work list so the parallel loop balances across classes.
  std::vector<std::pair<std::size_t, const std::vector<std::size_t>*>> work;
  work.reserve(dataset.real_count());
  for (const auto& [label, idxs] : members) {
    (void)label;
    for (std::size_t i : idxs) {
      work.emplace_back(i, &idxs);
    }
  }

  const std::int64_t n = static_cast<std::int64_t>(work.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t w = 0; w < n; ++w) {
    const auto [i, idxs] = work[static_cast<std::size_t>(w)];
    const auto neighbors = knn_among(reps, i, *idxs, k);
    densities[i] = instance_density(reps, i, neighbors, config);
  }
  return densities;
}

std::map<std::string, std::vector<double>> class_gammas(const Dataset& dataset,
                                                        const Representations& reps,
                                                        const DensityConfig& config) {
  const auto densities = instance_densities(dataset, reps, config);
  const auto members = class_members(dataset);
  std::map<std::string, std::vector<double>> gammas;
  for (const auto& [label, idxs] : members) {
    double total = 0.0;
    for (std::size_t i : idxs) {
      total += densities[i];
    }
    if (!(total > 0.0)) {
      throw InternalError("class '" + label + "' has zero total density");
    }
    std::vector<double>& g = gammas[label];
    g.reserve(idxs.size());
    for (std::size_t i : idxs) {
      g.push_back(densities[i] / total);
    }
  }
  return gammas;
}

double entropy_from_densities(const std::vector<double>& densities) {
  if (densities.empty()) {
    throw InputError("entropy of an empty class");
  }
  double total = 0.0;
  for (double d : densities) {
    total += d;
  }
  if (!(total > 0.0)) {
    throw InputError("cannot normalize: class total density is zero");
  }
  double theta = 0.0;
  for (double d : densities) {
    const double gamma = d / total;
    if (gamma > 0.0) {
      theta -= gamma * std::log2(gamma);
    }
  }
  return theta;
}

EntropyReport class_entropy(const Dataset& dataset,
                            const Representations& reps,
                            const DensityConfig& config,
                            std::string source) {
  const auto densities = instance_densities(dataset, reps, config);
  const auto members = class_members(dataset);
  if (members.empty()) {
    throw InputError("dataset has no real instances");
  }
  EntropyReport report;
  report.source = std::move(source);
  for (const auto& [label, idxs] : members) {
    std::vector<double> lambdas;
    lambdas.reserve(idxs.size());
    for (std::size_t i : idxs) {
      lambdas.push_back(densities[i]);
    }
    report.per_class_entropy[label] = entropy_from_densities(lambdas);
    report.class_counts[label] = idxs.size();
  }
  report.imbalance = entropy_imbalance(report.per_class_entropy);
  report.instance_fingerprint = instance_fingerprint(dataset);
  return report;
}

double entropy_imbalance(const std::map<std::string, double>& per_class_entropy) {
  if (per_class_entropy.empty()) {
    throw InputError("entropy imbalance of an empty report");
  }
  double max_theta = -1.0;
  double sum = 0.0;
  for (const auto& [label, theta] : per_class_entropy) {
    (void)label;
    max_theta = std::max(max_theta, theta);
    sum += theta;
  }
  const double mean = sum / static_cast<double>(per_class_entropy.size());
  return max_theta - mean;
}

double entropy_imbalance_gain(const EntropyReport& raw, const EntropyReport& machine) {
  if (raw.class_counts != machine.class_counts ||
      raw.instance_fingerprint != machine.instance_fingerprint) {
    throw InputError("entropy reports '" + raw.source + "' and '" + machine.source +
                     "' describe different instance sets");
  }
  return raw.imbalance - machine.imbalance;
}

std::uint64_t instance_fingerprint(const Dataset& dataset) {
  // FNV-1a over sorted real-instance ids: order-independent, portable.
  std::vector<const std::string*> ids;
  ids.reserve(dataset.size());
  for (const Instance& inst : dataset.instances()) {
    if (!inst.synthetic) {
      ids.push_back(&inst.id);
    }
  }
  std::sort(ids.begin(), ids.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  std::uint64_t h = 14695981039346656037ull;
  for (const std::string* id : ids) {
    for (unsigned char c : *id) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace storm
