#include "storm/machines.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "storm/entropy.hpp"

namespace storm {

namespace {

constexpr double kDistanceFloor = 1e-9;

double hyper(const MachineSpec& spec, const std::string& key, double fallback) {
  auto it = spec.hyperparameters.find(key);
  return it == spec.hyperparameters.end() ? fallback : it->second;
}

void check_hyperparameters(const MachineSpec& spec,
                           std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : spec.hyperparameters) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw InputError("machine '" + spec.id + "': unknown hyperparameter '" + key +
                       "' for kind '" + spec.kind + "'");
    }
  }
}

std::vector<double> normalize(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    total += w;
  }
  if (!(total > 0.0)) {
    return std::vector<double>(weights.size(), 1.0 / static_cast<double>(weights.size()));
  }
  for (double& w : weights) {
    w /= total;
  }
  return weights;
}

// Softmin over distances: exp(-(d - d_min)/T), normalized.
std::vector<double> softmin_scores(const std::vector<double>& distances, double temperature) {
  if (distances.size() == 1) {
    return {1.0};
  }
  const double d_min = *std::min_element(distances.begin(), distances.end());
  const double t = temperature > 0.0 ? temperature : 1.0;
  std::vector<double> scores(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) {
    scores[i] = std::exp(-(distances[i] - d_min) / t);
  }
  return normalize(std::move(scores));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

class CentroidMachine : public TrainedMachine {
 public:
  std::vector<FeatureVector> centroids;
  double temperature = 1.0;
  bool identity_representation = false;

 protected:
  std::vector<double> scores_for(const FeatureVector& x) const override {
    return softmin_scores(centroid_distances(x), temperature);
  }

  FeatureVector representation_for(const FeatureVector& x) const override {
    if (identity_representation) {
      return x;
    }
    return centroid_distances(x);
  }

  Json parameters_json() const override {
    Json j;
    j["centroids"] = centroids;
    j["temperature"] = temperature;
    return j;
  }

 private:
  FeatureVector centroid_distances(const FeatureVector& x) const {
    FeatureVector d(centroids.size());
    for (std::size_t b = 0; b < centroids.size(); ++b) {
      d[b] = euclidean_distance(x, centroids[b]);
    }
    return d;
  }
};

class KnnMachine : public TrainedMachine {
 public:
  std::size_t k = 5;
  std::vector<FeatureVector> rows;
  std::vector<std::size_t> row_blocks;

 protected:
  std::vector<double> scores_for(const FeatureVector& x) const override {
    const auto order = nearest(x, rows.size());
    const std::size_t take = std::min(k, order.size());
    std::vector<double> votes(block_count(), 0.0);
    for (std::size_t r = 0; r < take; ++r) {
      const auto& [d, idx] = order[r];
      votes[row_blocks[idx]] += 1.0 / std::max(d, kDistanceFloor);
    }
    return normalize(std::move(votes));
  }

  // Mean distance to the k nearest training members of each block.
  FeatureVector representation_for(const FeatureVector& x) const override {
    std::vector<std::vector<double>> per_block(block_count());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      per_block[row_blocks[i]].push_back(euclidean_distance(x, rows[i]));
    }
    FeatureVector rep(block_count(), 0.0);
    for (std::size_t b = 0; b < per_block.size(); ++b) {
      auto& d = per_block[b];
      const std::size_t take = std::min(k, d.size());
      std::partial_sort(d.begin(), d.begin() + take, d.end());
      double sum = 0.0;
      for (std::size_t r = 0; r < take; ++r) {
        sum += d[r];
      }
      rep[b] = take == 0 ? 0.0 : sum / static_cast<double>(take);
    }
    return rep;
  }

  Json parameters_json() const override {
    Json j;
    j["k"] = k;
    j["rows"] = rows;
    j["row_blocks"] = row_blocks;
    return j;
  }

 private:
  std::vector<std::pair<double, std::size_t>> nearest(const FeatureVector& x,
                                                      std::size_t take) const {
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      order.emplace_back(euclidean_distance(x, rows[i]), i);
    }
    const std::size_t n = std::min(take, order.size());
    std::partial_sort(order.begin(), order.begin() + n, order.end());
    order.resize(n);
    return order;
  }
};

class LinearMachine : public TrainedMachine {
 public:
  std::vector<double> mean;
  std::vector<double> inv_std;
  std::vector<FeatureVector> weights;  // per block
  std::vector<double> bias;            // per block

 protected:
  std::vector<double> scores_for(const FeatureVector& x) const override {
    if (x.size() != mean.size()) {
      throw InputError("feature vector of dimension " + std::to_string(x.size()) +
                       " does not match the machine's input dimension " +
                       std::to_string(mean.size()));
    }
    std::vector<double> p(weights.size());
    for (std::size_t b = 0; b < weights.size(); ++b) {
      double margin = bias[b];
      for (std::size_t d = 0; d < x.size(); ++d) {
        margin += weights[b][d] * (x[d] - mean[d]) * inv_std[d];
      }
      p[b] = sigmoid(margin);
    }
    return normalize(std::move(p));
  }

  FeatureVector representation_for(const FeatureVector& x) const override {
    return scores_for(x);
  }

  Json parameters_json() const override {
    Json j;
    j["mean"] = mean;
    j["inv_std"] = inv_std;
    j["weights"] = weights;
    j["bias"] = bias;
    return j;
  }
};

}  // namespace

const FeatureVector& TrainedMachine::input_for(const Instance& instance) const {
  return instance.view(spec_.view);
}

std::vector<double> TrainedMachine::block_scores(const Instance& instance) const {
  return scores_for(input_for(instance));
}

Prediction TrainedMachine::predict(const Instance& instance) const {
  const auto scores = block_scores(instance);
  std::size_t best = 0;
  for (std::size_t b = 1; b < scores.size(); ++b) {
    if (scores[b] > scores[best]) {
      best = b;
    }
  }
  return {best, scores[best]};
}

FeatureVector TrainedMachine::representation(const Instance& instance) const {
  return representation_for(input_for(instance));
}

double discriminative_score(const std::vector<FeatureVector>& reps,
                            const std::vector<std::size_t>& class_ids) {
  if (reps.size() != class_ids.size()) {
    throw InternalError("discriminative_score: size mismatch");
  }
  double intra_sum = 0.0, inter_sum = 0.0;
  std::size_t intra_n = 0, inter_n = 0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    for (std::size_t j = i + 1; j < reps.size(); ++j) {
      const double d = euclidean_distance(reps[i], reps[j]);
      if (class_ids[i] == class_ids[j]) {
        intra_sum += d;
        ++intra_n;
      } else {
        inter_sum += d;
        ++inter_n;
      }
    }
  }
  const double intra = intra_n == 0 ? 0.0 : intra_sum / static_cast<double>(intra_n);
  const double inter = inter_n == 0 ? 0.0 : inter_sum / static_cast<double>(inter_n);
  return inter - intra;
}

namespace {

struct TrainRows {
  std::vector<FeatureVector> features;
  std::vector<std::size_t> blocks;
  std::vector<bool> synthetic;
  std::vector<std::size_t> class_ids;  // original class index
};

void fit_centroid(CentroidMachine& machine, const TrainRows& rows, double temperature_factor) {
  const std::size_t blocks = machine.block_count();
  const std::size_t dim = rows.features.front().size();
  machine.centroids.assign(blocks, FeatureVector(dim, 0.0));
  std::vector<std::size_t> counts(blocks, 0);
  for (std::size_t i = 0; i < rows.features.size(); ++i) {
    const std::size_t b = rows.blocks[i];
    ++counts[b];
    for (std::size_t d = 0; d < dim; ++d) {
      machine.centroids[b][d] += rows.features[i][d];
    }
  }
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t d = 0; d < dim; ++d) {
      machine.centroids[b][d] /= static_cast<double>(counts[b]);
    }
  }
  double pair_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < blocks; ++a) {
    for (std::size_t b = a + 1; b < blocks; ++b) {
      pair_sum += euclidean_distance(machine.centroids[a], machine.centroids[b]);
      ++pairs;
    }
  }
  const double scale = pairs == 0 ? 0.0 : pair_sum / static_cast<double>(pairs);
  machine.temperature = scale * temperature_factor;
}

void fit_linear(LinearMachine& machine, const TrainRows& rows, std::size_t iterations,
                double learning_rate) {
  const std::size_t blocks = machine.block_count();
  const std::size_t dim = rows.features.front().size();
  const std::size_t n = rows.features.size();

  machine.mean.assign(dim, 0.0);
  machine.inv_std.assign(dim, 1.0);
  for (const auto& row : rows.features) {
    for (std::size_t d = 0; d < dim; ++d) {
      machine.mean[d] += row[d];
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    machine.mean[d] /= static_cast<double>(n);
  }
  std::vector<double> var(dim, 0.0);
  for (const auto& row : rows.features) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double c = row[d] - machine.mean[d];
      var[d] += c * c;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double sd = std::sqrt(var[d] / static_cast<double>(n));
    machine.inv_std[d] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }

  std::vector<FeatureVector> z(n, FeatureVector(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      z[i][d] = (rows.features[i][d] - machine.mean[d]) * machine.inv_std[d];
    }
  }

  machine.weights.assign(blocks, FeatureVector(dim, 0.0));
  machine.bias.assign(blocks, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    auto& w = machine.weights[b];
    double& bias = machine.bias[b];
    for (std::size_t it = 0; it < iterations; ++it) {
      std::vector<double> grad(dim, 0.0);
      double grad_bias = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double margin = bias;
        for (std::size_t d = 0; d < dim; ++d) {
          margin += w[d] * z[i][d];
        }
        const double y = rows.blocks[i] == b ? 1.0 : 0.0;
        const double err = sigmoid(margin) - y;
        for (std::size_t d = 0; d < dim; ++d) {
          grad[d] += err * z[i][d];
        }
        grad_bias += err;
      }
      for (std::size_t d = 0; d < dim; ++d) {
        w[d] -= learning_rate * grad[d] / static_cast<double>(n);
      }
      bias -= learning_rate * grad_bias / static_cast<double>(n);
    }
  }
}

}  // namespace

std::unique_ptr<TrainedMachine> train(const MachineSpec& spec, const Dataset& train_data) {
  if (spec.id.empty()) {
    throw InputError("machine spec has an empty id");
  }
  if (!train_data.has_view(spec.view)) {
    throw InputError("machine '" + spec.id + "': dataset has no view '" + spec.view + "'");
  }
  const PartitionVerdict verdict =
      validate_partition_subset(spec.partition, train_data.class_set());
  if (!verdict.valid) {
    throw InputError("machine '" + spec.id + "': invalid partition (" +
                     criterion_name(verdict.criterion) + "): " + verdict.detail);
  }

  std::unique_ptr<TrainedMachine> machine;
  if (spec.kind == "nearest_centroid" || spec.kind == "identity") {
    check_hyperparameters(spec, {"temperature_factor"});
    auto m = std::make_unique<CentroidMachine>();
    m->identity_representation = (spec.kind == "identity");
    machine = std::move(m);
  } else if (spec.kind == "knn") {
    check_hyperparameters(spec, {"k"});
    if (hyper(spec, "k", 5.0) < 1.0) {
      throw InputError("machine '" + spec.id + "': knn k must be >= 1");
    }
    machine = std::make_unique<KnnMachine>();
  } else if (spec.kind == "linear") {
    check_hyperparameters(spec, {"iterations", "learning_rate", "seed"});
    machine = std::make_unique<LinearMachine>();
  } else {
    throw InputError("machine '" + spec.id + "': unknown kind '" + spec.kind + "'");
  }
  machine->spec_ = spec;
  TrainingSummary& summary = machine->summary_;

  // Training scope: instances whose label the partition covers.
  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < train_data.size(); ++i) {
    const Instance& inst = train_data.instances()[i];
    if (!spec.partition.covers(inst.label)) {
      if (!inst.synthetic) {
        ++summary.excluded_uncovered;
      }
      continue;
    }
    if (inst.synthetic && !inst.has_view(spec.view)) {
      continue;
    }
    covered.push_back(i);
  }
  if (covered.empty()) {
    throw InputError("machine '" + spec.id + "': no training instances covered by partition " +
                     spec.partition.describe());
  }

  Dataset working = train_data.subset(covered);
  for (const auto& [cls, count] : working.class_counts()) {
    summary.class_counts[cls] = count;
  }

  if (spec.smote.has_value()) {
    const std::string& minority = train_data.class_set().rare_class;
    const std::size_t m = spec.partition.covers(minority) ? working.class_count(minority) : 0;
    if (m < 2) {
      summary.smote_skipped = true;
      log(LogLevel::info, "machine '" + spec.id + "': SMOTE skipped, minority '" + minority +
                              "' has " + std::to_string(m) + " covered instances");
    } else {
      SmoteConfig cfg = *spec.smote;
      if (cfg.k_smote > 0 && static_cast<std::size_t>(cfg.k_smote) > m - 1) {
        cfg.k_smote = static_cast<int>(m - 1);
      }
      SmoteResult res = smote_oversample(working, minority, spec.view, cfg);
      summary.synthetic_added = res.synthetics.size();
      working = std::move(res.augmented);
    }
  }

  TrainRows rows;
  for (const Instance& inst : working.instances()) {
    rows.features.push_back(inst.view(spec.view));
    rows.blocks.push_back(*spec.partition.block_of(inst.label));
    rows.synthetic.push_back(inst.synthetic);
    rows.class_ids.push_back(*train_data.class_set().index_of(inst.label));
  }

  const std::size_t block_count = spec.partition.blocks.size();
  summary.block_counts.assign(block_count, 0);
  for (std::size_t b : rows.blocks) {
    ++summary.block_counts[b];
  }
  for (std::size_t b = 0; b < block_count; ++b) {
    if (summary.block_counts[b] == 0) {
      throw InputError("machine '" + spec.id + "': block " + std::to_string(b) +
                       " has no training instances");
    }
  }

  if (auto* centroid = dynamic_cast<CentroidMachine*>(machine.get())) {
    fit_centroid(*centroid, rows, hyper(spec, "temperature_factor", 0.25));
  } else if (auto* knn = dynamic_cast<KnnMachine*>(machine.get())) {
    knn->k = static_cast<std::size_t>(hyper(spec, "k", 5.0));
    knn->rows = rows.features;
    knn->row_blocks = rows.blocks;
  } else if (auto* linear = dynamic_cast<LinearMachine*>(machine.get())) {
    const double iters = hyper(spec, "iterations", 200.0);
    if (iters < 0.0) {
      throw InputError("machine '" + spec.id + "': iterations must be >= 0");
    }
    fit_linear(*linear, rows, static_cast<std::size_t>(iters),
               hyper(spec, "learning_rate", 0.5));
  }

  // Majority original class per block, over real training rows; ties resolve
  // to class-set order.
  const auto& classes = train_data.class_set().classes;
  std::vector<std::map<std::size_t, std::size_t>> per_block_class(block_count);
  for (std::size_t i = 0; i < rows.blocks.size(); ++i) {
    if (!rows.synthetic[i]) {
      ++per_block_class[rows.blocks[i]][rows.class_ids[i]];
    }
  }
  machine->block_majority_.resize(block_count);
  for (std::size_t b = 0; b < block_count; ++b) {
    std::size_t best_class = 0, best_count = 0;
    for (const auto& [cls_idx, count] : per_block_class[b]) {
      if (count > best_count) {
        best_count = count;
        best_class = cls_idx;
      }
    }
    machine->block_majority_[b] = classes[best_class];
  }

  // Discriminative quality of the frozen representation on real training rows.
  {
    std::vector<FeatureVector> reps;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < rows.features.size(); ++i) {
      if (!rows.synthetic[i]) {
        reps.push_back(machine->representation_for(rows.features[i]));
        ids.push_back(rows.class_ids[i]);
      }
    }
    summary.discriminative_score = discriminative_score(reps, ids);
  }

  return machine;
}

double confidence(const TrainedMachine& machine, const Dataset& validation) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const Instance& inst : validation.instances()) {
    if (inst.synthetic) {
      continue;
    }
    ++n;
    const auto block = machine.spec().partition.block_of(inst.label);
    if (!block.has_value()) {
      continue;  // the machine cannot be correct on an uncovered label
    }
    sum += machine.block_scores(inst)[*block];
  }
  if (n == 0) {
    throw InputError("confidence over an empty validation set");
  }
  return sum / static_cast<double>(n);
}

std::vector<FeatureVector> machine_representations(const TrainedMachine& machine,
                                                   const Dataset& dataset) {
  std::vector<FeatureVector> reps;
  reps.reserve(dataset.size());
  for (const Instance& inst : dataset.instances()) {
    if (inst.synthetic && !inst.has_view(machine.spec().view)) {
      reps.emplace_back();
    } else {
      reps.push_back(machine.representation(inst));
    }
  }
  return reps;
}

Json machine_spec_to_json(const MachineSpec& spec) {
  Json j;
  j["id"] = spec.id;
  j["view"] = spec.view;
  j["kind"] = spec.kind;
  j["partition"] = spec.partition.blocks;
  j["hyperparameters"] = spec.hyperparameters;
  if (spec.smote.has_value()) {
    Json s;
    s["k_smote"] = spec.smote->k_smote;
    s["target_count"] = spec.smote->target_count;
    s["seed"] = spec.smote->seed;
    j["smote"] = s;
  }
  return j;
}

MachineSpec machine_spec_from_json(const Json& j) {
  MachineSpec spec;
  try {
    spec.id = j.at("id").get<std::string>();
    spec.view = j.at("view").get<std::string>();
    spec.kind = j.at("kind").get<std::string>();
    spec.partition.blocks = j.at("partition").get<std::vector<std::vector<std::string>>>();
    if (j.contains("hyperparameters")) {
      spec.hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
    }
    if (j.contains("smote") && !j.at("smote").is_null()) {
      const Json& s = j.at("smote");
      SmoteConfig cfg;
      if (s.contains("k_smote")) cfg.k_smote = s.at("k_smote").get<int>();
      if (s.contains("target_count")) cfg.target_count = s.at("target_count").get<std::size_t>();
      if (s.contains("seed")) cfg.seed = s.at("seed").get<std::uint64_t>();
      spec.smote = cfg;
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed machine spec: ") + e.what());
  }
  return spec;
}

Json TrainedMachine::to_json() const {
  Json j;
  j["format_version"] = 1;
  j["spec"] = machine_spec_to_json(spec_);
  j["parameters"] = parameters_json();
  Json summary;
  summary["class_counts"] = summary_.class_counts;
  summary["block_counts"] = summary_.block_counts;
  summary["excluded_uncovered"] = summary_.excluded_uncovered;
  summary["synthetic_added"] = summary_.synthetic_added;
  summary["smote_skipped"] = summary_.smote_skipped;
  summary["discriminative_score"] = summary_.discriminative_score;
  j["summary"] = summary;
  j["block_majority_class"] = block_majority_;
  return j;
}

std::unique_ptr<TrainedMachine> TrainedMachine::from_json(const Json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw InputError("unsupported machine format_version");
    }
    const MachineSpec spec = machine_spec_from_json(j.at("spec"));
    const Json& p = j.at("parameters");
    std::unique_ptr<TrainedMachine> machine;
    if (spec.kind == "nearest_centroid" || spec.kind == "identity") {
      auto m = std::make_unique<CentroidMachine>();
      m->centroids = p.at("centroids").get<std::vector<FeatureVector>>();
      m->temperature = p.at("temperature").get<double>();
      m->identity_representation = (spec.kind == "identity");
      machine = std::move(m);
    } else if (spec.kind == "knn") {
      auto m = std::make_unique<KnnMachine>();
      m->k = p.at("k").get<std::size_t>();
      m->rows = p.at("rows").get<std::vector<FeatureVector>>();
      m->row_blocks = p.at("row_blocks").get<std::vector<std::size_t>>();
      machine = std::move(m);
    } else if (spec.kind == "linear") {
      auto m = std::make_unique<LinearMachine>();
      m->mean = p.at("mean").get<std::vector<double>>();
      m->inv_std = p.at("inv_std").get<std::vector<double>>();
      m->weights = p.at("weights").get<std::vector<FeatureVector>>();
      m->bias = p.at("bias").get<std::vector<double>>();
      machine = std::move(m);
    } else {
      throw InputError("unknown machine kind '" + spec.kind + "'");
    }
    machine->spec_ = spec;
    machine->block_majority_ = j.at("block_majority_class").get<std::vector<std::string>>();
    const Json& s = j.at("summary");
    machine->summary_.class_counts = s.at("class_counts").get<std::map<std::string, std::size_t>>();
    machine->summary_.block_counts = s.at("block_counts").get<std::vector<std::size_t>>();
    machine->summary_.excluded_uncovered = s.at("excluded_uncovered").get<std::size_t>();
    machine->summary_.synthetic_added = s.at("synthetic_added").get<std::size_t>();
    machine->summary_.smote_skipped = s.at("smote_skipped").get<bool>();
    machine->summary_.discriminative_score = s.at("discriminative_score").get<double>();
    return machine;
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed machine document: ") + e.what());
  }
}

}  // namespace storm
