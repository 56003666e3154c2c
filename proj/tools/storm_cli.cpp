// Command-line front end: assess, select, predict, evaluate, verify and
// generate workflows over dataset CSVs and JSON artifacts.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "storm/data_io.hpp"
#include "storm/oracle.hpp"
#include "storm/selection.hpp"

namespace {

using storm::Json;

struct RunConfig {
  storm::StormConfig storm_config;
  storm::DensityConfig density;
  double validation_fraction = 0.25;
  std::optional<std::uint64_t> split_seed;
  std::uint64_t seed = 1;
  int threads = 0;
};

RunConfig load_run_config(const std::string& path) {
  RunConfig config;
  if (path.empty()) {
    return config;
  }
  const Json j = storm::load_json(path);
  if (j.contains("storm")) {
    config.storm_config = storm::storm_config_from_json(j.at("storm"));
  }
  if (j.contains("density")) {
    config.density = storm::density_config_from_json(j.at("density"));
  }
  try {
    if (j.contains("split")) {
      const Json& s = j.at("split");
      if (s.contains("validation_fraction")) {
        config.validation_fraction = s.at("validation_fraction").get<double>();
      }
      if (s.contains("seed")) {
        config.split_seed = s.at("seed").get<std::uint64_t>();
      }
    }
    if (j.contains("seed")) {
      config.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("threads")) {
      config.threads = j.at("threads").get<int>();
    }
  } catch (const Json::exception& e) {
    throw storm::InputError(path + ": malformed config: " + e.what());
  }
  return config;
}

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) {
    omp_set_num_threads(threads);
  }
#else
  (void)threads;
#endif
}

Json resolved_config_json(const RunConfig& config) {
  Json j;
  j["storm"] = storm::storm_config_to_json(config.storm_config);
  j["density"] = storm::density_config_to_json(config.density);
  Json split;
  split["validation_fraction"] = config.validation_fraction;
  split["seed"] = config.split_seed.value_or(config.seed);
  j["split"] = split;
  j["seed"] = config.seed;
  j["threads"] = config.threads;
  return j;
}

std::string fmt(double value, const char* format) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), format, value);
  return buffer;
}

void print_metrics(const storm::MetricsRecord& m) {
  std::printf("accuracy     %8.4f\n", m.accuracy);
  std::printf("precision    %8.4f%s\n", m.precision,
              m.no_positive_predictions ? "  (no positive predictions)" : "");
  std::printf("sensitivity  %8.4f\n", m.sensitivity);
  std::printf("f1           %8.4f\n", m.f1);
  std::printf("tp/fp/fn/tn  %zu/%zu/%zu/%zu\n", m.tp, m.fp, m.fn, m.tn);
}

int cmd_generate(const std::string& spec_path, const std::string& out_path) {
  const storm::SyntheticSpec spec = storm::load_synthetic_spec(spec_path);
  const storm::Dataset dataset = storm::generate_synthetic(spec);
  storm::save_csv(dataset, out_path);
  std::printf("wrote %zu instances (%zu classes, %zu views) to %s\n", dataset.size(),
              dataset.class_set().classes.size(), dataset.view_dims().size(),
              out_path.c_str());
  return 0;
}

int cmd_assess(const std::string& dataset_path, const std::string& specs_path,
               const std::string& raw_view, const RunConfig& config,
               const std::string& out_path) {
  const storm::Dataset dataset = storm::load_csv(dataset_path);
  const auto specs = storm::load_machine_specs(specs_path);

  std::vector<std::unique_ptr<storm::TrainedMachine>> machines;
  std::vector<const storm::TrainedMachine*> pointers;
  for (const auto& spec : specs) {
    machines.push_back(storm::train(spec, dataset));
    pointers.push_back(machines.back().get());
  }
  const storm::AssessResult result =
      storm::assess(dataset, pointers, raw_view, config.density);

  const auto& classes = dataset.class_set().classes;
  std::printf("%-20s", "source");
  for (const auto& cls : classes) {
    std::printf(" %12s", ("theta:" + cls).c_str());
  }
  std::printf(" %10s %10s\n", "eta", "EIG");

  auto print_row = [&](const storm::EntropyReport& report, const char* eig_text) {
    std::printf("%-20s", report.source.c_str());
    for (const auto& cls : classes) {
      const auto it = report.per_class_entropy.find(cls);
      std::printf(" %12s", it == report.per_class_entropy.end()
                               ? "-"
                               : fmt(it->second, "%.4f").c_str());
    }
    std::printf(" %10s %10s\n", fmt(report.imbalance, "%.4f").c_str(), eig_text);
  };
  print_row(result.raw, "-");
  for (const auto& row : result.machines) {
    print_row(row.report, fmt(row.eig, "%.3f").c_str());
  }

  if (!out_path.empty()) {
    Json j;
    j["format_version"] = 1;
    auto report_json = [](const storm::EntropyReport& r) {
      Json e;
      e["source"] = r.source;
      e["per_class_entropy"] = r.per_class_entropy;
      e["imbalance"] = r.imbalance;
      e["class_counts"] = r.class_counts;
      return e;
    };
    j["raw"] = report_json(result.raw);
    Json rows = Json::array();
    for (const auto& row : result.machines) {
      Json r = report_json(row.report);
      r["eig"] = row.eig;
      rows.push_back(std::move(r));
    }
    j["machines"] = rows;
    j["resolved_config"] = resolved_config_json(RunConfig(config));
    storm::write_text(out_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_select(const std::string& dataset_path, const std::string& specs_path,
               const std::string& rare_class, const std::string& raw_view,
               const RunConfig& config, const std::string& out_path,
               const std::string& report_path) {
  storm::Dataset dataset = storm::load_csv(dataset_path);
  if (!rare_class.empty()) {
    if (!dataset.class_set().contains(rare_class)) {
      throw storm::InputError("rare class '" + rare_class + "' is not in the dataset");
    }
    dataset = dataset.with_rare_class(rare_class);
  }
  const std::string rare = dataset.class_set().rare_class;
  const auto specs = storm::load_machine_specs(specs_path);
  const storm::Split split = storm::make_stratified_split(
      dataset, config.validation_fraction, config.split_seed.value_or(config.seed));

  storm::Cascade cascade = storm::select(dataset, split, specs, rare, raw_view,
                                         config.storm_config, config.density);
  cascade.report.resolved_config = resolved_config_json(config);

  std::printf("cascade depth %zu, rare class '%s'\n", cascade.nodes.size(), rare.c_str());
  for (std::size_t i = 0; i < cascade.nodes.size(); ++i) {
    const auto& node = cascade.nodes[i];
    const auto& round = cascade.report.rounds[i];
    std::printf("  %zu. %-16s block=%zu decision=%-7s gini=%s eig=%s%s%s\n", i + 1,
                node.machine->spec().id.c_str(), node.selected_block,
                node.decision == storm::CascadeNode::Decision::stop ? "stop" : "recurse",
                std::isnan(node.gini_at_node) ? "-" : fmt(node.gini_at_node, "%.4f").c_str(),
                fmt(node.eig_at_node, "%.3f").c_str(),
                round.stop_reason.empty() ? "" : "  stop: ",
                round.stop_reason.c_str());
  }
  for (const auto& excl : cascade.report.excluded) {
    std::printf("  excluded: %-16s %s\n", excl.machine_id.c_str(), excl.reason.c_str());
  }
  for (const auto& warning : cascade.report.warnings) {
    std::printf("  warning: %s\n", warning.c_str());
  }
  std::printf("validation metrics (rare vs rest):\n");
  print_metrics(cascade.report.final_validation);

  storm::write_text(out_path, cascade.to_json().dump(2) + "\n");
  if (!report_path.empty()) {
    Json j = cascade.to_json().at("report");
    j["format_version"] = 1;
    storm::write_text(report_path, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_predict(const std::string& cascade_path, const std::string& dataset_path,
                const std::string& out_path) {
  const storm::Cascade cascade = storm::Cascade::from_json(storm::load_json(cascade_path));
  const storm::Dataset dataset = storm::load_csv(dataset_path);

  std::ostringstream out;
  out << "id,label,score,coarse,overridden,decided_by\n";
  for (const auto& inst : dataset.instances()) {
    if (inst.synthetic) {
      continue;
    }
    const storm::CascadePrediction pred = storm::cascade_predict(cascade, inst);
    out << inst.id << ',' << pred.label << ',' << fmt(pred.score, "%.17g") << ','
        << (pred.coarse ? 1 : 0) << ',' << (pred.overridden ? 1 : 0) << ','
        << pred.decided_by << '\n';
  }
  storm::write_text(out_path, out.str());
  std::printf("wrote %zu predictions to %s\n", dataset.size(), out_path.c_str());
  return 0;
}

int cmd_evaluate(const std::string& cascade_path, const std::string& dataset_path,
                 const std::string& out_path) {
  const storm::Cascade cascade = storm::Cascade::from_json(storm::load_json(cascade_path));
  const storm::Dataset dataset = storm::load_csv(dataset_path);
  const storm::MetricsRecord metrics =
      storm::evaluate(cascade, dataset, cascade.rare_class);
  std::printf("rare class '%s' on %zu instances\n", cascade.rare_class.c_str(),
              dataset.size());
  print_metrics(metrics);
  if (!out_path.empty()) {
    Json j = storm::metrics_to_json(metrics);
    j["format_version"] = 1;
    j["rare_class"] = cascade.rare_class;
    storm::write_text(out_path, j.dump(2) + "\n");
  }
  return 0;
}

// Randomized cross-check of the entropy pipeline against the brute-force
// oracle, plus greedy-vs-exhaustive selection on planted benchmarks.
int cmd_verify(std::size_t n_max, std::size_t count, std::uint64_t seed,
               std::size_t select_instances, double gap_bound) {
  if (n_max > 500) {
    throw storm::InputError("--n-max above the oracle limit of 500");
  }
  if (n_max < 8) {
    throw storm::InputError("--n-max must be at least 8");
  }

  std::size_t entropy_ok = 0;
  double worst_delta = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    storm::Rng rng(storm::mix_seed(seed, "verify-entropy-" + std::to_string(t)));
    const std::size_t n_classes = 2 + rng.pick(3);
    const std::size_t dim_a = 2 + rng.pick(7);
    const std::size_t dim_b = 2 + rng.pick(7);

    std::vector<storm::Instance> instances;
    storm::OriginalClassSet class_set;
    const std::size_t per_class_cap = std::max<std::size_t>(2, n_max / n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
      const std::string name = "c" + std::to_string(c);
      class_set.classes.push_back(name);
      const std::size_t members =
          2 + (per_class_cap > 2 ? rng.pick(per_class_cap - 2 + 1) : 0);
      for (std::size_t i = 0; i < members; ++i) {
        storm::Instance inst;
        inst.id = name + "_" + std::to_string(i);
        inst.label = name;
        storm::FeatureVector a(dim_a), b(dim_b);
        for (auto& v : a) v = 2.0 * static_cast<double>(c) + rng.gaussian();
        for (auto& v : b) v = rng.gaussian();
        inst.views["a"] = std::move(a);
        inst.views["b"] = std::move(b);
        instances.push_back(std::move(inst));
      }
    }
    class_set.rare_class = class_set.classes.front();
    const storm::Dataset dataset(class_set, std::move(instances));

    storm::DensityConfig density;
    density.k = static_cast<int>(1 + rng.pick(8));

    const auto reps_a = storm::view_representations(dataset, "a");
    const auto reps_b = storm::view_representations(dataset, "b");
    const auto impl_a = storm::class_entropy(dataset, reps_a, density, "a");
    const auto impl_b = storm::class_entropy(dataset, reps_b, density, "b");
    const auto oracle_a = storm::oracle::oracle_entropy(dataset, reps_a, density);
    const auto oracle_b = storm::oracle::oracle_entropy(dataset, reps_b, density);

    double delta = 0.0;
    for (const auto& [cls, theta] : oracle_a) {
      delta = std::max(delta, std::abs(theta - impl_a.per_class_entropy.at(cls)));
    }
    for (const auto& [cls, theta] : oracle_b) {
      delta = std::max(delta, std::abs(theta - impl_b.per_class_entropy.at(cls)));
    }
    delta = std::max(delta, std::abs(storm::oracle::oracle_imbalance(oracle_a) -
                                     impl_a.imbalance));
    delta = std::max(delta, std::abs(storm::oracle::oracle_imbalance(oracle_b) -
                                     impl_b.imbalance));
    const double eig_impl = storm::entropy_imbalance_gain(impl_a, impl_b);
    const double eig_oracle = storm::oracle::oracle_imbalance(oracle_a) -
                              storm::oracle::oracle_imbalance(oracle_b);
    delta = std::max(delta, std::abs(eig_impl - eig_oracle));

    worst_delta = std::max(worst_delta, delta);
    if (delta <= 1e-9) {
      ++entropy_ok;
    }
  }
  std::printf("entropy match: %zu/%zu within 1e-9 (worst delta %.3g)\n", entropy_ok, count,
              worst_delta);

  std::size_t greedy_ok = 0;
  bool greedy_exceeded = false;
  double max_gap = 0.0;
  for (std::size_t t = 0; t < select_instances; ++t) {
    const std::uint64_t inst_seed = storm::mix_seed(seed, "verify-select-" + std::to_string(t));
    storm::SyntheticSpec spec;
    spec.classes = {{"A", 30}, {"B", 24}, {"R", 6}};
    spec.rare_class = "R";
    spec.seed = inst_seed;
    spec.views = {
        {"inf", "informative", 3, 8.0, 1.0, {"A", "R"}, {}},
        {"noise", "noise", 4, 0.0, 1.0, {}, {}},
    };
    const storm::Dataset dataset = storm::generate_synthetic(spec);
    const storm::Split split = storm::make_stratified_split(dataset, 0.3, inst_seed);

    storm::LabelPartition rare_vs_rest;
    rare_vs_rest.blocks = {{"R"}, {"A", "B"}};
    std::vector<storm::MachineSpec> specs;
    specs.push_back({"m_inf", "inf", "nearest_centroid", rare_vs_rest, {}, std::nullopt});
    specs.push_back({"m_noise", "noise", "nearest_centroid", rare_vs_rest, {}, std::nullopt});
    specs.push_back({"m_inf_knn", "inf", "knn", rare_vs_rest, {}, std::nullopt});

    storm::StormConfig config;
    config.max_depth = 3;
    const storm::Cascade greedy =
        storm::select(dataset, split, specs, "R", "noise", config, storm::DensityConfig{});
    const auto exhaustive =
        storm::oracle::oracle_best_subset(dataset, split, specs, "R", config, 3);

    const double gap = exhaustive.f1 - greedy.report.final_validation.f1;
    if (gap < -1e-12) {
      greedy_exceeded = true;
    }
    max_gap = std::max(max_gap, gap);
    if (gap >= -1e-12 && gap <= gap_bound) {
      ++greedy_ok;
    }
  }
  std::printf("greedy-vs-exhaustive: %zu/%zu within gap %.3f (max gap %.4f); greedy %s exhaustive\n",
              greedy_ok, select_instances, gap_bound, max_gap,
              greedy_exceeded ? "EXCEEDED" : "never exceeded");

  if (entropy_ok != count || greedy_ok != select_instances || greedy_exceeded) {
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-based modality assessment and greedy cascade selection "
               "for rare-event classification"};
  app.require_subcommand(1);

  std::string dataset_path, specs_path, cascade_path, config_path, out_path, report_path;
  std::string raw_view, rare_class, synth_spec_path;
  std::optional<std::uint64_t> seed_flag;
  int threads_flag = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed_flag, "random seed (overrides the config file)");
    cmd->add_option("--threads", threads_flag, "worker thread cap (0 = all cores)");
  };

  CLI::App* generate = app.add_subcommand("generate", "synthesize a benchmark dataset CSV");
  generate->add_option("--spec", synth_spec_path, "synthetic spec JSON")->required();
  generate->add_option("--out", out_path, "output dataset CSV")->required();

  CLI::App* assess = app.add_subcommand("assess", "entropy report per machine");
  assess->add_option("--dataset", dataset_path, "dataset CSV")->required();
  assess->add_option("--specs", specs_path, "machine specs JSON")->required();
  assess->add_option("--raw-view", raw_view, "raw data view name")->required();
  assess->add_option("--out", out_path, "output report JSON");
  add_common(assess);

  CLI::App* select = app.add_subcommand("select", "run the greedy cascade selection");
  select->add_option("--dataset", dataset_path, "dataset CSV")->required();
  select->add_option("--specs", specs_path, "machine specs JSON")->required();
  select->add_option("--rare-class", rare_class, "rare class identifier");
  select->add_option("--raw-view", raw_view, "raw data view name")->required();
  select->add_option("--out", out_path, "output cascade JSON")->required();
  select->add_option("--report", report_path, "also write the selection report JSON");
  add_common(select);

  CLI::App* predict = app.add_subcommand("predict", "label instances with a cascade");
  predict->add_option("--cascade", cascade_path, "cascade JSON")->required();
  predict->add_option("--dataset", dataset_path, "dataset CSV")->required();
  predict->add_option("--out", out_path, "output labels CSV")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "rare-vs-rest metrics on a test set");
  evaluate->add_option("--cascade", cascade_path, "cascade JSON")->required();
  evaluate->add_option("--dataset", dataset_path, "test dataset CSV")->required();
  evaluate->add_option("--out", out_path, "output metrics JSON");

  CLI::App* verify = app.add_subcommand("verify", "oracle equivalence checks");
  std::size_t n_max = 50, count = 100, select_instances = 20;
  std::uint64_t verify_seed = 1;
  double gap_bound = 0.05;
  verify->add_option("--n-max", n_max, "max instances per random dataset (<= 500)");
  verify->add_option("--count", count, "number of random datasets");
  verify->add_option("--seed", verify_seed, "seed for the randomized checks");
  verify->add_option("--select-instances", select_instances,
                     "number of greedy-vs-exhaustive instances");
  verify->add_option("--gap", gap_bound, "allowed F1 gap to the exhaustive optimum");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    return 2;
  }

  try {
    RunConfig config = load_run_config(config_path);
    if (seed_flag.has_value()) {
      config.seed = *seed_flag;
    }
    if (threads_flag >= 0) {
      config.threads = threads_flag;
    }
    apply_threads(config.threads);

    if (generate->parsed()) {
      return cmd_generate(synth_spec_path, out_path);
    }
    if (assess->parsed()) {
      return cmd_assess(dataset_path, specs_path, raw_view, config, out_path);
    }
    if (select->parsed()) {
      return cmd_select(dataset_path, specs_path, rare_class, raw_view, config, out_path,
                        report_path);
    }
    if (predict->parsed()) {
      return cmd_predict(cascade_path, dataset_path, out_path);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(cascade_path, dataset_path, out_path);
    }
    if (verify->parsed()) {
      return cmd_verify(n_max, count, verify_seed, select_instances, gap_bound);
    }
  } catch (const storm::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
