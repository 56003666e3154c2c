#include "storm/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "storm/purity.hpp"

namespace storm {

void StormConfig::validate() const {
  if (!(epsilon_m > 0.0)) {
    throw InputError("epsilon_m must be > 0");
  }
  if (!(epsilon_g > 0.0 && epsilon_g < 1.0)) {
    throw InputError("epsilon_g must be in (0, 1)");
  }
  if (!(d_th > 0.0 && d_th < 1.0)) {
    throw InputError("d_th must be in (0, 1)");
  }
  if (patience < 1) {
    throw InputError("patience must be >= 1");
  }
  if (!(accuracy_delta >= 0.0)) {
    throw InputError("accuracy_delta must be >= 0");
  }
  if (max_depth < 1) {
    throw InputError("max_depth must be >= 1");
  }
  if (!(override_score > 0.0 && override_score < 1.0)) {
    throw InputError("override_score must be in (0, 1)");
  }
}

Split make_stratified_split(const Dataset& dataset, double validation_fraction,
                            std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InputError("validation_fraction must be in (0, 1)");
  }
  Rng rng(seed);
  Split split;
  for (const auto& cls : dataset.class_set().classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const Instance& inst = dataset.instances()[i];
      if (!inst.synthetic && inst.label == cls) {
        members.push_back(i);
      }
    }
    if (members.empty()) {
      continue;
    }
    if (members.size() == 1) {
      log(LogLevel::warn, "class '" + cls + "' has a single instance; assigned to training");
      split.train_ids.push_back(dataset.instances()[members[0]].id);
      continue;
    }
    rng.shuffle(members);
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(validation_fraction * static_cast<double>(members.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
    for (std::size_t r = 0; r < members.size(); ++r) {
      const std::string& id = dataset.instances()[members[r]].id;
      if (r < n_val) {
        split.validation_ids.push_back(id);
      } else {
        split.train_ids.push_back(id);
      }
    }
  }
  return split;
}

AssessResult assess(const Dataset& dataset,
                    const std::vector<const TrainedMachine*>& machines,
                    const std::string& raw_view,
                    const DensityConfig& density) {
  AssessResult result;
  result.raw = class_entropy(dataset, view_representations(dataset, raw_view), density,
                             "raw:" + raw_view);
  for (const TrainedMachine* machine : machines) {
    if (machine == nullptr) {
      throw InternalError("assess received a null machine");
    }
    AssessRow row;
    row.report = class_entropy(dataset, machine_representations(*machine, dataset), density,
                               machine->spec().id);
    row.eig = entropy_imbalance_gain(result.raw, row.report);
    result.machines.push_back(std::move(row));
  }
  std::stable_sort(result.machines.begin(), result.machines.end(),
                   [](const AssessRow& a, const AssessRow& b) {
                     if (a.eig != b.eig) {
                       return a.eig > b.eig;
                     }
                     return a.report.source < b.report.source;
                   });
  return result;
}

namespace {

struct Candidate {
  std::shared_ptr<const TrainedMachine> machine;
  CandidateRow row;
};

// Trains and scores every candidate on the current pool. Slots are
// independent, so the loop parallelizes without changing results.
std::vector<Candidate> evaluate_candidates(const Dataset& pool,
                                           const std::vector<MachineSpec>& specs,
                                           const EntropyReport& raw_report,
                                           const DensityConfig& density) {
  std::vector<Candidate> out(specs.size());
  std::vector<std::string> internal_errors(specs.size());
  const std::int64_t n = static_cast<std::int64_t>(specs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    Candidate& cand = out[static_cast<std::size_t>(i)];
    const MachineSpec& spec = specs[static_cast<std::size_t>(i)];
    cand.row.machine_id = spec.id;
    try {
      std::shared_ptr<const TrainedMachine> machine = train(spec, pool);
      const auto reps = machine_representations(*machine, pool);
      const EntropyReport report = class_entropy(pool, reps, density, spec.id);
      cand.row.eta = report.imbalance;
      cand.row.eig = entropy_imbalance_gain(raw_report, report);
      cand.machine = std::move(machine);
    } catch (const InputError& e) {
      cand.row.trainable = false;
      cand.row.note = e.what();
    } catch (const std::exception& e) {
      cand.row.trainable = false;
      internal_errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const std::string& msg : internal_errors) {
    if (!msg.empty()) {
      throw InternalError("candidate evaluation failed: " + msg);
    }
  }
  return out;
}

// Max-EIG winner with the dependability tie-break: candidates within
// epsilon_m of the best EIG are tied; among tied ones, any with confidence
// above d_th beat the rest (higher confidence first, then EIG, then id);
// with none above, higher EIG wins, then id.
std::size_t pick_winner(std::vector<Candidate>& candidates, const StormConfig& config,
                        const Dataset& confidence_pool) {
  double max_eig = -std::numeric_limits<double>::infinity();
  for (const Candidate& c : candidates) {
    if (c.machine != nullptr) {
      max_eig = std::max(max_eig, c.row.eig);
    }
  }
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].machine != nullptr && candidates[i].row.eig >= max_eig - config.epsilon_m) {
      tied.push_back(i);
    }
  }
  if (tied.size() == 1) {
    return tied[0];
  }
  for (std::size_t i : tied) {
    candidates[i].row.tied = true;
    candidates[i].row.confidence = confidence(*candidates[i].machine, confidence_pool);
  }
  std::vector<std::size_t> dependable;
  for (std::size_t i : tied) {
    if (*candidates[i].row.confidence > config.d_th) {
      dependable.push_back(i);
    }
  }
  auto id_of = [&](std::size_t i) -> const std::string& {
    return candidates[i].row.machine_id;
  };
  if (!dependable.empty()) {
    std::size_t best = dependable[0];
    for (std::size_t i : dependable) {
      const double ci = *candidates[i].row.confidence;
      const double cb = *candidates[best].row.confidence;
      if (ci > cb ||
          (ci == cb && (candidates[i].row.eig > candidates[best].row.eig ||
                        (candidates[i].row.eig == candidates[best].row.eig &&
                         id_of(i) < id_of(best))))) {
        best = i;
      }
    }
    return best;
  }
  std::size_t best = tied[0];
  for (std::size_t i : tied) {
    if (candidates[i].row.eig > candidates[best].row.eig ||
        (candidates[i].row.eig == candidates[best].row.eig && id_of(i) < id_of(best))) {
      best = i;
    }
  }
  return best;
}

CascadePrediction predict_with_nodes(const std::vector<CascadeNode>& nodes,
                                     double override_score,
                                     const std::string& rare,
                                     const Instance& instance) {
  if (nodes.empty()) {
    throw InternalError("cascade has no nodes");
  }
  for (const CascadeNode& node : nodes) {
    const std::string& view = node.machine->spec().view;
    if (!instance.has_view(view)) {
      throw InputError("machine '" + node.machine->spec().id + "' requires view '" + view +
                       "', missing from instance '" + instance.id + "'");
    }
  }

  std::size_t deciding = nodes.size() - 1;
  Prediction pred{};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    pred = nodes[i].machine->predict(instance);
    if (i + 1 < nodes.size() && pred.block == nodes[i].selected_block) {
      continue;  // routed deeper
    }
    deciding = i;
    break;
  }

  const CascadeNode& dnode = nodes[deciding];
  CascadePrediction out;
  out.decided_by = dnode.machine->spec().id;
  out.label = dnode.machine->block_majority_class()[pred.block];
  out.coarse = dnode.machine->block_is_coarse(pred.block);
  out.score = pred.score;

  // An upstream non-rare assignment is final unless a downstream machine
  // calls the rare class above the override threshold.
  if (out.label != rare) {
    for (std::size_t j = deciding + 1; j < nodes.size(); ++j) {
      const TrainedMachine& machine = *nodes[j].machine;
      const Prediction pj = machine.predict(instance);
      const auto& block = machine.spec().partition.blocks[pj.block];
      if (block.size() == 1 && block[0] == rare && pj.score > override_score) {
        out.label = rare;
        out.score = pj.score;
        out.coarse = false;
        out.overridden = true;
        out.decided_by = machine.spec().id;
        break;
      }
    }
  }
  return out;
}

MetricsRecord metrics_for_nodes(const std::vector<CascadeNode>& nodes,
                                double override_score,
                                const std::string& rare,
                                const Dataset& test) {
  MetricsRecord m;
  std::size_t total = 0;
  for (const Instance& inst : test.instances()) {
    if (inst.synthetic) {
      continue;
    }
    ++total;
    const CascadePrediction pred = predict_with_nodes(nodes, override_score, rare, inst);
    const bool predicted_rare = pred.label == rare;
    const bool is_rare = inst.label == rare;
    if (predicted_rare && is_rare) ++m.tp;
    else if (predicted_rare && !is_rare) ++m.fp;
    else if (!predicted_rare && is_rare) ++m.fn;
    else ++m.tn;
  }
  if (total == 0) {
    throw InputError("evaluation over an empty dataset");
  }
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(total);
  m.no_positive_predictions = (m.tp + m.fp == 0);
  m.precision = (m.tp + m.fp) == 0 ? 0.0
                                   : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  m.sensitivity = (m.tp + m.fn) == 0
                      ? 0.0
                      : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.f1 = (m.precision + m.sensitivity) > 0.0
             ? 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity)
             : 0.0;
  return m;
}

std::size_t rare_count(const Dataset& dataset, const std::string& rare) {
  return dataset.class_count(rare);
}

void validate_spec_for_cascade(const MachineSpec& spec, const Dataset& dataset,
                               const std::string& rare_class) {
  const PartitionVerdict verdict = validate_partition_subset(spec.partition, dataset.class_set());
  if (!verdict.valid) {
    throw InputError("machine '" + spec.id + "': invalid partition (" +
                     criterion_name(verdict.criterion) + "): " + verdict.detail);
  }
  if (!spec.partition.covers(rare_class)) {
    throw InputError("machine '" + spec.id + "': no block contains the rare class '" +
                     rare_class + "'");
  }
  if (!dataset.has_view(spec.view)) {
    throw InputError("machine '" + spec.id + "': dataset has no view '" + spec.view + "'");
  }
}

void validate_specs_for_select(const std::vector<MachineSpec>& specs, const Dataset& dataset,
                               const std::string& rare_class) {
  if (specs.empty()) {
    throw InputError("select needs at least one machine spec");
  }
  std::set<std::string> ids;
  for (const MachineSpec& spec : specs) {
    if (!ids.insert(spec.id).second) {
      throw InputError("duplicate machine id '" + spec.id + "'");
    }
    validate_spec_for_cascade(spec, dataset, rare_class);
  }
}

std::pair<Dataset, Dataset> split_datasets(const Dataset& dataset, const Split& split) {
  std::set<std::string> train_set(split.train_ids.begin(), split.train_ids.end());
  for (const std::string& id : split.validation_ids) {
    if (train_set.count(id) != 0) {
      throw InputError("instance '" + id + "' appears in both split sides");
    }
  }
  Dataset train = dataset.subset_by_ids(split.train_ids);
  Dataset validation = dataset.subset_by_ids(split.validation_ids);
  if (train.real_count() == 0) {
    throw InputError("training split is empty");
  }
  if (validation.real_count() == 0) {
    throw InputError("validation split is empty");
  }
  return {std::move(train), std::move(validation)};
}

}  // namespace

Cascade select(const Dataset& dataset,
               const Split& split,
               const std::vector<MachineSpec>& specs,
               const std::string& rare_class,
               const std::string& raw_view,
               const StormConfig& config,
               const DensityConfig& density) {
  config.validate();
  density.validate();
  if (!dataset.class_set().contains(rare_class)) {
    throw InputError("rare class '" + rare_class + "' is not in the class set");
  }
  if (!dataset.has_view(raw_view)) {
    throw InputError("raw view '" + raw_view + "' is not in the dataset");
  }
  const Dataset ds = dataset.class_set().rare_class == rare_class
                         ? dataset
                         : dataset.with_rare_class(rare_class);
  validate_specs_for_select(specs, ds, rare_class);
  auto [train_pool, val_set] = split_datasets(ds, split);
  if (rare_count(train_pool, rare_class) == 0) {
    throw InputError("training split contains no rare-class instances");
  }

  Cascade cascade;
  cascade.rare_class = rare_class;
  cascade.override_score = config.override_score;
  SelectionReport& report = cascade.report;

  Dataset pool = train_pool;
  Dataset val_routed = val_set;
  double prev_acc = std::numeric_limits<double>::quiet_NaN();
  int plateau = 0;
  std::set<std::string> used_ids;
  Dataset terminal_pool = pool;

  for (int round = 1;; ++round) {
    // Conditions that close the cascade before another node is added. They
    // can only fire after round 1, so nodes.back() exists.
    if (pool.real_count() == 0) {
      report.warnings.push_back("round " + std::to_string(round) + ": training pool exhausted");
      report.rounds.back().stop_reason = "training pool exhausted";
      cascade.nodes.back().decision = CascadeNode::Decision::stop;
      break;
    }
    if (rare_count(pool, rare_class) == 0) {
      report.warnings.push_back("round " + std::to_string(round) +
                                ": rare class exhausted from the training pool");
      report.rounds.back().stop_reason = "rare class exhausted";
      cascade.nodes.back().decision = CascadeNode::Decision::stop;
      break;
    }

    const EntropyReport raw_report = class_entropy(
        pool, view_representations(pool, raw_view), density, "raw:" + raw_view);
    std::vector<Candidate> candidates = evaluate_candidates(pool, specs, raw_report, density);

    const bool any_trainable =
        std::any_of(candidates.begin(), candidates.end(),
                    [](const Candidate& c) { return c.machine != nullptr; });
    if (!any_trainable) {
      if (cascade.nodes.empty()) {
        throw InputError("no machine is trainable on the training split");
      }
      report.warnings.push_back("round " + std::to_string(round) +
                                ": no trainable candidate machine");
      report.rounds.back().stop_reason = "no trainable candidate";
      cascade.nodes.back().decision = CascadeNode::Decision::stop;
      break;
    }

    const std::size_t winner =
        pick_winner(candidates, config, val_routed.real_count() > 0 ? val_routed : val_set);
    const MachineSpec& winner_spec = specs[winner];
    std::shared_ptr<const TrainedMachine> machine = candidates[winner].machine;

    RoundRecord rec;
    rec.round = static_cast<std::size_t>(round);
    rec.pool_size = pool.real_count();
    rec.raw_eta = raw_report.imbalance;
    for (const Candidate& c : candidates) {
      rec.candidates.push_back(c.row);
    }
    rec.chosen = winner_spec.id;

    const std::size_t route = *winner_spec.partition.block_of(rare_class);
    const bool exact_rare = winner_spec.partition.blocks[route].size() == 1;

    std::vector<std::size_t> assigned;
    std::vector<std::string> assigned_labels;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const Instance& inst = pool.instances()[i];
      if (inst.synthetic) {
        continue;
      }
      if (machine->predict(inst).block == route) {
        assigned.push_back(i);
        assigned_labels.push_back(inst.label);
      }
    }
    const double gini = assigned.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : gini_index(assigned_labels).gini;

    CascadeNode node;
    node.machine = machine;
    node.selected_block = route;
    node.decision = CascadeNode::Decision::recurse;
    node.gini_at_node = gini;
    node.eig_at_node = candidates[winner].row.eig;
    cascade.nodes.push_back(std::move(node));

    Dataset next_pool = pool.subset(assigned);
    rec.routed_away_count = pool.real_count() - next_pool.real_count();
    for (const Instance& inst : pool.instances()) {
      if (!inst.synthetic && inst.label == rare_class &&
          !next_pool.index_of(inst.id).has_value()) {
        rec.routed_away_rare_ids.push_back(inst.id);
      }
    }

    const double acc =
        metrics_for_nodes(cascade.nodes, config.override_score, rare_class, val_set).accuracy;
    rec.validation_accuracy = acc;

    std::string stop;
    if (exact_rare && !assigned.empty() && gini < config.epsilon_g) {
      stop = "rare block pure (gini below epsilon_g)";
    }
    if (stop.empty() && assigned.empty()) {
      stop = "no instances assigned to the selected block";
    }
    if (stop.empty()) {
      if (!std::isnan(prev_acc) && std::abs(acc - prev_acc) < config.accuracy_delta) {
        ++plateau;
      } else {
        plateau = 0;
      }
      if (plateau >= config.patience) {
        stop = "validation accuracy plateau";
      }
    }
    if (stop.empty() && round >= config.max_depth) {
      stop = "maximum cascade depth reached";
    }
    rec.stop_reason = stop;
    report.rounds.push_back(std::move(rec));
    used_ids.insert(winner_spec.id);
    terminal_pool = next_pool;

    if (!stop.empty()) {
      cascade.nodes.back().decision = CascadeNode::Decision::stop;
      break;
    }
    prev_acc = acc;
    pool = std::move(next_pool);

    std::vector<std::size_t> val_kept;
    for (std::size_t i = 0; i < val_routed.size(); ++i) {
      const Instance& inst = val_routed.instances()[i];
      if (!inst.synthetic && machine->predict(inst).block == route) {
        val_kept.push_back(i);
      }
    }
    val_routed = val_routed.subset(val_kept);
  }

  report.final_validation =
      metrics_for_nodes(cascade.nodes, config.override_score, rare_class, val_set);

  // Why the unused specs stayed out: a negative first-round EIG means the
  // machine's representation is worse than raw data; otherwise probe whether
  // appending it to the cascade would have moved validation F1 at all.
  for (const MachineSpec& spec : specs) {
    if (used_ids.count(spec.id) != 0) {
      continue;
    }
    ExclusionRecord record;
    record.machine_id = spec.id;
    const auto& first_round = report.rounds.front().candidates;
    const auto row = std::find_if(first_round.begin(), first_round.end(),
                                  [&](const CandidateRow& r) { return r.machine_id == spec.id; });
    if (row != first_round.end() && row->trainable && row->eig < 0.0) {
      record.reason = "EIG below raw baseline";
    } else if (terminal_pool.real_count() == 0) {
      record.reason = "no F1 change";  // nothing left to route; appending is a no-op
    } else {
      try {
        std::shared_ptr<const TrainedMachine> probe = train(spec, terminal_pool);
        std::vector<CascadeNode> extended = cascade.nodes;
        CascadeNode extra;
        extra.machine = probe;
        extra.selected_block = *spec.partition.block_of(rare_class);
        extra.decision = CascadeNode::Decision::stop;
        extra.gini_at_node = std::numeric_limits<double>::quiet_NaN();
        extra.eig_at_node = 0.0;
        extended.back().decision = CascadeNode::Decision::recurse;
        extended.push_back(std::move(extra));
        const double ext_f1 =
            metrics_for_nodes(extended, config.override_score, rare_class, val_set).f1;
        record.reason = std::abs(ext_f1 - report.final_validation.f1) < 0.005
                            ? "no F1 change"
                            : "outranked by selected machines";
      } catch (const InputError&) {
        // The cascade cannot be extended with this machine at all, so the
        // metrics cannot move either.
        record.reason = "no F1 change";
      }
    }
    report.excluded.push_back(std::move(record));
  }

  report.resolved_config = Json::object();
  report.resolved_config["storm"] = storm_config_to_json(config);
  report.resolved_config["density"] = density_config_to_json(density);
  return cascade;
}

CascadePrediction cascade_predict(const Cascade& cascade, const Instance& instance) {
  return predict_with_nodes(cascade.nodes, cascade.override_score, cascade.rare_class, instance);
}

MetricsRecord evaluate(const Cascade& cascade, const Dataset& test,
                       const std::string& rare_class) {
  return metrics_for_nodes(cascade.nodes, cascade.override_score, rare_class, test);
}

Cascade build_cascade_for_order(const Dataset& dataset,
                                const Split& split,
                                const std::vector<MachineSpec>& order,
                                const std::string& rare_class,
                                const StormConfig& config) {
  if (order.empty()) {
    throw InputError("forced cascade order is empty");
  }
  const Dataset ds = dataset.class_set().rare_class == rare_class
                         ? dataset
                         : dataset.with_rare_class(rare_class);
  for (const MachineSpec& spec : order) {
    validate_spec_for_cascade(spec, ds, rare_class);
  }
  auto [pool, val_set] = split_datasets(ds, split);
  (void)val_set;

  Cascade cascade;
  cascade.rare_class = rare_class;
  cascade.override_score = config.override_score;

  for (const MachineSpec& spec : order) {
    if (pool.real_count() == 0) {
      break;
    }
    std::shared_ptr<const TrainedMachine> machine;
    try {
      machine = train(spec, pool);
    } catch (const InputError&) {
      if (cascade.nodes.empty()) {
        throw;
      }
      break;  // order not realizable past this prefix
    }
    const std::size_t route = *spec.partition.block_of(rare_class);
    std::vector<std::size_t> assigned;
    std::vector<std::string> assigned_labels;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const Instance& inst = pool.instances()[i];
      if (!inst.synthetic && machine->predict(inst).block == route) {
        assigned.push_back(i);
        assigned_labels.push_back(inst.label);
      }
    }
    CascadeNode node;
    node.machine = std::move(machine);
    node.selected_block = route;
    node.decision = CascadeNode::Decision::recurse;
    node.gini_at_node = assigned.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : gini_index(assigned_labels).gini;
    node.eig_at_node = 0.0;
    cascade.nodes.push_back(std::move(node));
    pool = pool.subset(assigned);
  }
  cascade.nodes.back().decision = CascadeNode::Decision::stop;
  return cascade;
}

namespace {

Json double_or_null(double v) {
  if (std::isnan(v)) {
    return nullptr;
  }
  return v;
}

double json_double_or_nan(const Json& j) {
  if (j.is_null()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

Json candidate_row_to_json(const CandidateRow& row) {
  Json j;
  j["machine_id"] = row.machine_id;
  j["trainable"] = row.trainable;
  j["note"] = row.note;
  j["eta"] = row.eta;
  j["eig"] = row.eig;
  j["tied"] = row.tied;
  j["confidence"] = row.confidence.has_value() ? Json(*row.confidence) : Json(nullptr);
  return j;
}

CandidateRow candidate_row_from_json(const Json& j) {
  CandidateRow row;
  row.machine_id = j.at("machine_id").get<std::string>();
  row.trainable = j.at("trainable").get<bool>();
  row.note = j.at("note").get<std::string>();
  row.eta = j.at("eta").get<double>();
  row.eig = j.at("eig").get<double>();
  row.tied = j.at("tied").get<bool>();
  if (!j.at("confidence").is_null()) {
    row.confidence = j.at("confidence").get<double>();
  }
  return row;
}

Json report_to_json(const SelectionReport& report) {
  Json j;
  Json rounds = Json::array();
  for (const RoundRecord& rec : report.rounds) {
    Json r;
    r["round"] = rec.round;
    r["pool_size"] = rec.pool_size;
    r["raw_eta"] = rec.raw_eta;
    Json rows = Json::array();
    for (const CandidateRow& row : rec.candidates) {
      rows.push_back(candidate_row_to_json(row));
    }
    r["candidates"] = rows;
    r["chosen"] = rec.chosen;
    r["validation_accuracy"] = rec.validation_accuracy;
    r["stop_reason"] = rec.stop_reason;
    r["routed_away_count"] = rec.routed_away_count;
    r["routed_away_rare_ids"] = rec.routed_away_rare_ids;
    rounds.push_back(std::move(r));
  }
  j["rounds"] = rounds;
  Json excluded = Json::array();
  for (const ExclusionRecord& rec : report.excluded) {
    Json e;
    e["machine_id"] = rec.machine_id;
    e["reason"] = rec.reason;
    excluded.push_back(std::move(e));
  }
  j["excluded"] = excluded;
  j["warnings"] = report.warnings;
  j["final_validation"] = metrics_to_json(report.final_validation);
  j["resolved_config"] = report.resolved_config.is_null() ? Json::object()
                                                          : report.resolved_config;
  return j;
}

SelectionReport report_from_json(const Json& j) {
  SelectionReport report;
  for (const Json& r : j.at("rounds")) {
    RoundRecord rec;
    rec.round = r.at("round").get<std::size_t>();
    rec.pool_size = r.at("pool_size").get<std::size_t>();
    rec.raw_eta = r.at("raw_eta").get<double>();
    for (const Json& row : r.at("candidates")) {
      rec.candidates.push_back(candidate_row_from_json(row));
    }
    rec.chosen = r.at("chosen").get<std::string>();
    rec.validation_accuracy = r.at("validation_accuracy").get<double>();
    rec.stop_reason = r.at("stop_reason").get<std::string>();
    rec.routed_away_count = r.at("routed_away_count").get<std::size_t>();
    rec.routed_away_rare_ids = r.at("routed_away_rare_ids").get<std::vector<std::string>>();
    report.rounds.push_back(std::move(rec));
  }
  for (const Json& e : j.at("excluded")) {
    report.excluded.push_back({e.at("machine_id").get<std::string>(),
                               e.at("reason").get<std::string>()});
  }
  report.warnings = j.at("warnings").get<std::vector<std::string>>();
  report.final_validation = [&] {
    const Json& m = j.at("final_validation");
    MetricsRecord metrics;
    metrics.accuracy = m.at("accuracy").get<double>();
    metrics.precision = m.at("precision").get<double>();
    metrics.sensitivity = m.at("sensitivity").get<double>();
    metrics.f1 = m.at("f1").get<double>();
    metrics.tp = m.at("tp").get<std::size_t>();
    metrics.fp = m.at("fp").get<std::size_t>();
    metrics.fn = m.at("fn").get<std::size_t>();
    metrics.tn = m.at("tn").get<std::size_t>();
    metrics.no_positive_predictions = m.at("no_positive_predictions").get<bool>();
    return metrics;
  }();
  report.resolved_config = j.at("resolved_config");
  return report;
}

}  // namespace

Json metrics_to_json(const MetricsRecord& metrics) {
  Json j;
  j["accuracy"] = metrics.accuracy;
  j["precision"] = metrics.precision;
  j["sensitivity"] = metrics.sensitivity;
  j["f1"] = metrics.f1;
  j["tp"] = metrics.tp;
  j["fp"] = metrics.fp;
  j["fn"] = metrics.fn;
  j["tn"] = metrics.tn;
  j["no_positive_predictions"] = metrics.no_positive_predictions;
  return j;
}

Json storm_config_to_json(const StormConfig& config) {
  Json j;
  j["epsilon_m"] = config.epsilon_m;
  j["epsilon_g"] = config.epsilon_g;
  j["d_th"] = config.d_th;
  j["patience"] = config.patience;
  j["accuracy_delta"] = config.accuracy_delta;
  j["max_depth"] = config.max_depth;
  j["override_score"] = config.override_score;
  return j;
}

StormConfig storm_config_from_json(const Json& j) {
  StormConfig config;
  try {
    if (j.contains("epsilon_m")) config.epsilon_m = j.at("epsilon_m").get<double>();
    if (j.contains("epsilon_g")) config.epsilon_g = j.at("epsilon_g").get<double>();
    if (j.contains("d_th")) config.d_th = j.at("d_th").get<double>();
    if (j.contains("patience")) config.patience = j.at("patience").get<int>();
    if (j.contains("accuracy_delta")) config.accuracy_delta = j.at("accuracy_delta").get<double>();
    if (j.contains("max_depth")) config.max_depth = j.at("max_depth").get<int>();
    if (j.contains("override_score")) config.override_score = j.at("override_score").get<double>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed storm config: ") + e.what());
  }
  return config;
}

Json density_config_to_json(const DensityConfig& config) {
  Json j;
  j["k"] = config.k;
  j["distance_floor"] = config.distance_floor;
  return j;
}

DensityConfig density_config_from_json(const Json& j) {
  DensityConfig config;
  try {
    if (j.contains("k")) config.k = j.at("k").get<int>();
    if (j.contains("distance_floor")) config.distance_floor = j.at("distance_floor").get<double>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed density config: ") + e.what());
  }
  return config;
}

Json Cascade::to_json() const {
  Json j;
  j["format_version"] = 1;
  j["rare_class"] = rare_class;
  j["override_score"] = override_score;
  Json nodes_json = Json::array();
  for (const CascadeNode& node : nodes) {
    Json n;
    n["machine"] = node.machine->to_json();
    n["selected_block"] = node.selected_block;
    n["decision"] = node.decision == CascadeNode::Decision::stop ? "stop" : "recurse";
    n["gini_at_node"] = double_or_null(node.gini_at_node);
    n["eig_at_node"] = node.eig_at_node;
    nodes_json.push_back(std::move(n));
  }
  j["nodes"] = nodes_json;
  j["report"] = report_to_json(report);
  return j;
}

Cascade Cascade::from_json(const Json& j) {
  Cascade cascade;
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw InputError("unsupported cascade format_version");
    }
    cascade.rare_class = j.at("rare_class").get<std::string>();
    cascade.override_score = j.at("override_score").get<double>();
    for (const Json& n : j.at("nodes")) {
      CascadeNode node;
      node.machine = TrainedMachine::from_json(n.at("machine"));
      node.selected_block = n.at("selected_block").get<std::size_t>();
      node.decision = n.at("decision").get<std::string>() == "stop"
                          ? CascadeNode::Decision::stop
                          : CascadeNode::Decision::recurse;
      node.gini_at_node = json_double_or_nan(n.at("gini_at_node"));
      node.eig_at_node = n.at("eig_at_node").get<double>();
      cascade.nodes.push_back(std::move(node));
    }
    if (cascade.nodes.empty()) {
      throw InputError("cascade has no nodes");
    }
    if (j.contains("report")) {
      cascade.report = report_from_json(j.at("report"));
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed cascade document: ") + e.what());
  }
  return cascade;
}

}  // namespace storm
