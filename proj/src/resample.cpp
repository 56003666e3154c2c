#include "storm/resample.hpp"

#include <algorithm>

#include "storm/entropy.hpp"

namespace storm {

void SmoteConfig::validate() const {
  if (k_smote < 0) {
    throw InputError("k_smote must be >= 0 (0 = auto), got " + std::to_string(k_smote));
  }
}

SmoteResult smote_oversample(const Dataset& dataset,
                             const std::string& minority_class,
                             const std::string& view,
                             const SmoteConfig& config) {
  config.validate();
  if (!dataset.class_set().contains(minority_class)) {
    throw InputError("minority class '" + minority_class + "' is not in the class set");
  }
  if (!dataset.has_view(view)) {
    throw InputError("dataset has no view '" + view + "'");
  }

  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Instance& inst = dataset.instances()[i];
    if (!inst.synthetic && inst.label == minority_class) {
      minority.push_back(i);
    }
  }
  const std::size_t m = minority.size();
  if (m < 2) {
    throw InputError("minority class '" + minority_class + "' has " + std::to_string(m) +
                     " instances; SMOTE needs at least 2");
  }

  std::size_t target = config.target_count;
  if (target == 0) {
    for (const auto& [cls, count] : dataset.class_counts()) {
      (void)cls;
      target = std::max(target, count);
    }
  } else if (target < m) {
    throw InputError("SMOTE target_count " + std::to_string(target) +
                     " is below the current minority count " + std::to_string(m));
  }

  const std::size_t k =
      config.k_smote == 0 ? std::min<std::size_t>(5, m - 1)
                          : static_cast<std::size_t>(config.k_smote);
  if (k > m - 1) {
    throw InputError("k_smote " + std::to_string(k) + " exceeds minority count - 1 = " +
                     std::to_string(m - 1));
  }

  // k nearest minority neighbours per minority instance; ties by dataset order.
  std::vector<std::vector<std::size_t>> neighbors(m);
  for (std::size_t a = 0; a < m; ++a) {
    std::vector<std::pair<double, std::size_t>> dists;
    dists.reserve(m - 1);
    const FeatureVector& va = dataset.instances()[minority[a]].view(view);
    for (std::size_t b = 0; b < m; ++b) {
      if (b == a) {
        continue;
      }
      dists.emplace_back(euclidean_distance(va, dataset.instances()[minority[b]].view(view)),
                         minority[b]);
    }
    std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
    for (std::size_t r = 0; r < k; ++r) {
      neighbors[a].push_back(dists[r].second);
    }
  }

  SmoteResult result{dataset, {}};
  std::vector<Instance> instances = dataset.instances();
  Rng rng(config.seed);
  for (std::size_t s = 0; m + s < target; ++s) {
    const std::size_t a = s % m;
    const Instance& base = dataset.instances()[minority[a]];
    const Instance& nn = dataset.instances()[neighbors[a][rng.pick(k)]];
    const double u = rng.uniform();

    const FeatureVector& xa = base.view(view);
    const FeatureVector& xb = nn.view(view);
    FeatureVector synth(xa.size());
    for (std::size_t d = 0; d < xa.size(); ++d) {
      synth[d] = xa[d] + u * (xb[d] - xa[d]);
    }

    Instance inst;
    inst.id = base.id + "#s" + std::to_string(s);
    inst.label = minority_class;
    inst.views[view] = std::move(synth);
    inst.synthetic = true;
    result.synthetics.push_back({inst.id, base.id, nn.id, u});
    instances.push_back(std::move(inst));
  }
  result.augmented = Dataset(dataset.class_set(), std::move(instances));
  return result;
}

}  // namespace storm
