#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "storm/entropy.hpp"
#include "storm/machines.hpp"

namespace storm {

// Greedy, Gini-gated, EIG-maximizing construction of a machine cascade
// targeting the rare class.
//
// Each round trains every candidate machine on the current sample pool,
// ranks them by entropy imbalance gain against the raw view of that pool,
// breaks near-ties by dependability, and routes the pool through the
// winner's rare-bearing block. Recursion stops when the rare block is pure
// enough (Gini below epsilon_g), the pool runs out, the validation accuracy
// plateaus, or the depth cap is reached.

struct StormConfig {
  double epsilon_m = 0.01;      // EIG tie threshold, bits
  double epsilon_g = 0.2;       // Gini purity gate
  double d_th = 0.7;            // dependability threshold for tie-breaks
  int patience = 2;             // plateau rounds before stopping
  double accuracy_delta = 0.001; // smallest accuracy change that counts
  int max_depth = 8;            // cascade depth cap
  double override_score = 0.9;  // downstream rare-class override threshold

  void validate() const;
};

struct Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
};

// Deterministic stratified split; every class with at least 2 instances gets
// at least one instance on each side.
Split make_stratified_split(const Dataset& dataset, double validation_fraction,
                            std::uint64_t seed);

struct CandidateRow {
  std::string machine_id;
  bool trainable = true;
  std::string note;                    // untrainable reason, tie-break notes
  double eta = 0.0;
  double eig = 0.0;
  bool tied = false;
  std::optional<double> confidence;    // only computed for tied candidates
};

struct RoundRecord {
  std::size_t round = 0;               // 1-based
  std::size_t pool_size = 0;           // real instances in the pool
  double raw_eta = 0.0;
  std::vector<CandidateRow> candidates;
  std::string chosen;
  double validation_accuracy = 0.0;
  std::string stop_reason;             // empty when the loop continued
  std::vector<std::string> routed_away_rare_ids;
  std::size_t routed_away_count = 0;
};

struct MetricsRecord {
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  bool no_positive_predictions = false;
};

struct ExclusionRecord {
  std::string machine_id;
  std::string reason;
};

struct SelectionReport {
  std::vector<RoundRecord> rounds;
  std::vector<ExclusionRecord> excluded;
  std::vector<std::string> warnings;
  MetricsRecord final_validation;
  Json resolved_config;  // storm + density; the CLI adds split/seed/threads
};

struct CascadeNode {
  std::shared_ptr<const TrainedMachine> machine;
  std::size_t selected_block = 0;  // block routed deeper (holds the rare class)
  enum class Decision { stop, recurse } decision = Decision::recurse;
  double gini_at_node = 0.0;       // NaN when nothing was assigned to the block
  double eig_at_node = 0.0;
};

struct Cascade {
  std::vector<CascadeNode> nodes;
  double override_score = 0.9;
  std::string rare_class;
  SelectionReport report;

  Json to_json() const;
  static Cascade from_json(const Json& j);
};

// Entropy assessment of trained machines against a raw view: the raw report,
// plus per-machine reports with EIG, sorted by EIG descending (ties by id).
struct AssessRow {
  EntropyReport report;
  double eig = 0.0;
};

struct AssessResult {
  EntropyReport raw;
  std::vector<AssessRow> machines;
};

AssessResult assess(const Dataset& dataset,
                    const std::vector<const TrainedMachine*>& machines,
                    const std::string& raw_view,
                    const DensityConfig& density);

Cascade select(const Dataset& dataset,
               const Split& split,
               const std::vector<MachineSpec>& specs,
               const std::string& rare_class,
               const std::string& raw_view,
               const StormConfig& config,
               const DensityConfig& density);

struct CascadePrediction {
  std::string label;
  double score = 0.0;
  bool coarse = false;      // label came from a multi-class block's majority
  bool overridden = false;  // a downstream rare prediction beat the upstream label
  std::string decided_by;   // machine id
};

CascadePrediction cascade_predict(const Cascade& cascade, const Instance& instance);

// Rare-vs-rest metrics of the cascade on a test set.
MetricsRecord evaluate(const Cascade& cascade, const Dataset& test,
                       const std::string& rare_class);

// Builds a cascade along a forced machine order with the same per-round
// training and routing select() uses (no EIG ranking, no early stops other
// than pool exhaustion). Shared with the exhaustive selection oracle.
Cascade build_cascade_for_order(const Dataset& dataset,
                                const Split& split,
                                const std::vector<MachineSpec>& order,
                                const std::string& rare_class,
                                const StormConfig& config);

Json metrics_to_json(const MetricsRecord& metrics);
Json storm_config_to_json(const StormConfig& config);
StormConfig storm_config_from_json(const Json& j);
Json density_config_to_json(const DensityConfig& config);
DensityConfig density_config_from_json(const Json& j);

}  // namespace storm
