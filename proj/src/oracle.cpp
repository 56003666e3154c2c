#include "storm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace storm {
namespace oracle {

namespace {

// Literal evaluation of the density definition for one instance: sort every
// other instance by distance, walk the ranking, keep same-class members
// until k are found, then average their inverse distances.
double literal_density(const Dataset& dataset,
                       const Representations& reps,
                       std::size_t target,
                       const DensityConfig& config) {
  struct Entry {
    double dist;
    std::size_t index;
  };
  std::vector<Entry> ranking;
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    if (j == target || dataset.instances()[j].synthetic) {
      continue;
    }
    ranking.push_back({euclidean_distance(reps[target], reps[j]), j});
  }
  std::stable_sort(ranking.begin(), ranking.end(), [](const Entry& a, const Entry& b) {
    if (a.dist != b.dist) {
      return a.dist < b.dist;
    }
    return a.index < b.index;
  });

  const std::string& label = dataset.instances()[target].label;
  std::vector<double> inverse;
  for (const Entry& e : ranking) {
    if (static_cast<int>(inverse.size()) == config.k) {
      break;
    }
    if (dataset.instances()[e.index].label == label) {
      inverse.push_back(1.0 / std::max(e.dist, config.distance_floor));
    }
  }
  if (inverse.empty()) {
    return 1.0 / config.distance_floor;
  }
  double sum = 0.0;
  for (double v : inverse) {
    sum += v;
  }
  return sum / static_cast<double>(inverse.size());
}

}  // namespace

double oracle_entropy_from_densities(const std::vector<double>& densities) {
  if (densities.empty()) {
    throw InputError("oracle entropy of an empty class");
  }
  double total = 0.0;
  for (double d : densities) {
    total += d;
  }
  if (!(total > 0.0)) {
    throw InputError("oracle cannot normalize: zero total density");
  }
  double theta = 0.0;
  for (double d : densities) {
    const double gamma = d / total;
    if (gamma > 0.0) {
      theta += -gamma * std::log2(gamma);
    }
  }
  return theta;
}

std::map<std::string, double> oracle_entropy(const Dataset& dataset,
                                             const Representations& reps,
                                             const DensityConfig& config) {
  config.validate();
  if (dataset.real_count() > 500) {
    throw InputError("oracle_entropy is limited to 500 instances, got " +
                     std::to_string(dataset.real_count()));
  }
  if (reps.size() != dataset.size()) {
    throw InputError("representations do not cover the dataset");
  }
  std::map<std::string, std::vector<double>> per_class_densities;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Instance& inst = dataset.instances()[i];
    if (inst.synthetic) {
      continue;
    }
    per_class_densities[inst.label].push_back(literal_density(dataset, reps, i, config));
  }
  std::map<std::string, double> theta;
  for (const auto& [label, densities] : per_class_densities) {
    theta[label] = oracle_entropy_from_densities(densities);
  }
  return theta;
}

double oracle_imbalance(const std::map<std::string, double>& per_class_entropy) {
  if (per_class_entropy.empty()) {
    throw InputError("oracle imbalance of an empty report");
  }
  double max_theta = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& [label, theta] : per_class_entropy) {
    (void)label;
    max_theta = std::max(max_theta, theta);
    sum += theta;
  }
  return max_theta - sum / static_cast<double>(per_class_entropy.size());
}

OracleSelection oracle_best_subset(const Dataset& dataset,
                                   const Split& split,
                                   const std::vector<MachineSpec>& specs,
                                   const std::string& rare_class,
                                   const StormConfig& config,
                                   int max_len) {
  if (specs.empty() || specs.size() > 4) {
    throw InputError("oracle_best_subset handles 1 to 4 specs, got " +
                     std::to_string(specs.size()));
  }
  if (max_len < 1 || max_len > 3) {
    throw InputError("oracle_best_subset depth must be 1 to 3");
  }

  const Dataset ds = dataset.class_set().rare_class == rare_class
                         ? dataset
                         : dataset.with_rare_class(rare_class);
  const Dataset validation = ds.subset_by_ids(split.validation_ids);

  OracleSelection best;
  bool have_best = false;
  std::vector<std::size_t> sequence;

  // Ordered sequences with repetition, lexicographic: every cascade the
  // greedy selector can build within the depth cap appears here.
  auto consider = [&]() {
    std::vector<MachineSpec> order;
    std::vector<std::string> ids;
    for (std::size_t idx : sequence) {
      order.push_back(specs[idx]);
      ids.push_back(specs[idx].id);
    }
    Cascade cascade;
    try {
      cascade = build_cascade_for_order(ds, split, order, rare_class, config);
    } catch (const InputError&) {
      return;  // order not realizable
    }
    const double f1 = evaluate(cascade, validation, rare_class).f1;
    if (!have_best || f1 > best.f1) {
      have_best = true;
      best.order = ids;
      best.f1 = f1;
      best.cascade = std::move(cascade);
    }
  };

  auto recurse = [&](auto&& self, int remaining) -> void {
    if (!sequence.empty()) {
      consider();
    }
    if (remaining == 0) {
      return;
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      sequence.push_back(i);
      self(self, remaining - 1);
      sequence.pop_back();
    }
  };
  recurse(recurse, max_len);

  if (!have_best) {
    throw InputError("no machine sequence was realizable on this split");
  }
  return best;
}

}  // namespace oracle
}  // namespace storm
