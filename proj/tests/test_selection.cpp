#include <doctest.h>

#include <cmath>

#include "storm/data_io.hpp"
#include "storm/selection.hpp"
#include "testutil.hpp"

using storm::Cascade;
using storm::CascadeNode;
using storm::DensityConfig;
using storm::LabelPartition;
using storm::MachineSpec;
using storm::Split;
using storm::StormConfig;

namespace {

Split split_of(const std::vector<std::string>& train, const std::vector<std::string>& val) {
  return Split{train, val};
}

// Ten training points plus three validation points engineered so the
// machine's rare block collects 3 rare + 1 other instance: gini 0.375.
struct GiniFixture {
  storm::Dataset dataset;
  Split split;
  std::vector<MachineSpec> specs;
};

GiniFixture gini_fixture() {
  std::vector<testutil::Row> rows;
  auto add = [&](std::string id, std::string label, double x) {
    rows.push_back({std::move(id), std::move(label), {{"v", {x}}}});
  };
  add("r0", "R", 0.0);
  add("r1", "R", 0.5);
  add("r2", "R", 1.0);
  add("b0", "B", 0.25);  // sits inside the rare cluster
  add("b1", "B", 10.0);
  add("b2", "B", 11.0);
  add("b3", "B", 12.0);
  add("b4", "B", 13.0);
  add("b5", "B", 14.0);
  add("b6", "B", 15.0);
  add("rv", "R", 0.6);
  add("bv1", "B", 12.5);
  add("bv2", "B", 13.5);
  GiniFixture fixture{testutil::dataset_of({"R", "B"}, "R", rows),
                      split_of({"r0", "r1", "r2", "b0", "b1", "b2", "b3", "b4", "b5", "b6"},
                               {"rv", "bv1", "bv2"}),
                      {}};
  fixture.specs.push_back({"m", "v", "nearest_centroid", {{{"R"}, {"B"}}}, {}, {}});
  return fixture;
}

storm::Instance instance_with(std::string id, std::string label,
                              std::map<std::string, storm::FeatureVector> views) {
  storm::Instance inst;
  inst.id = std::move(id);
  inst.label = std::move(label);
  inst.views = std::move(views);
  return inst;
}

// Cascade of an image-style gate (noise vs rest) and a downstream rare
// detector whose score is an exact vote share: `rare_votes` of the 20 ring
// points are labeled rare.
Cascade override_cascade(int rare_votes) {
  std::vector<testutil::Row> up_rows = {
      {"n0", "noise", {{"u", {0.0, 0.0}}}},
      {"n1", "noise", {{"u", {0.0, 2.0}}}},
      {"x0", "RSN", {{"u", {10.0, 0.0}}}},
      {"x1", "SOZ", {{"u", {10.0, 2.0}}}},
  };
  const auto up_ds = testutil::dataset_of({"noise", "RSN", "SOZ"}, "SOZ", up_rows);
  auto upstream = storm::train(
      {"gate", "u", "nearest_centroid", {{{"noise"}, {"RSN", "SOZ"}}}, {}, {}}, up_ds);

  const auto ring = testutil::ring25();
  std::vector<testutil::Row> down_rows;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    down_rows.push_back({"t" + std::to_string(i),
                         static_cast<int>(i) < rare_votes ? "SOZ" : "RSN",
                         {{"d", ring[i]}}});
  }
  const auto down_ds = testutil::dataset_of({"noise", "RSN", "SOZ"}, "SOZ", down_rows);
  auto downstream = storm::train(
      {"detector", "d", "knn", {{{"SOZ"}, {"RSN"}}}, {{"k", 20.0}}, {}}, down_ds);

  Cascade cascade;
  cascade.rare_class = "SOZ";
  cascade.override_score = 0.9;
  CascadeNode gate;
  gate.machine = std::move(upstream);
  gate.selected_block = 1;
  gate.decision = CascadeNode::Decision::recurse;
  gate.gini_at_node = std::numeric_limits<double>::quiet_NaN();
  CascadeNode detector;
  detector.machine = std::move(downstream);
  detector.selected_block = 0;
  detector.decision = CascadeNode::Decision::stop;
  detector.gini_at_node = 0.0;
  cascade.nodes.push_back(std::move(gate));
  cascade.nodes.push_back(std::move(detector));
  return cascade;
}

}  // namespace

TEST_CASE("a pure singleton rare block stops the cascade at depth one") {
  const auto ds = testutil::points({"R", "B"}, "R", "x",
                                   {{"R", {0.0}}, {"R", {1.0}}, {"R", {0.5}},
                                    {"B", {10.0}}, {"B", {11.0}}, {"B", {12.0}},
                                    {"R", {0.6}}, {"B", {11.5}}});
  const Split split = split_of({"i0", "i1", "i2", "i3", "i4", "i5"}, {"i6", "i7"});
  std::vector<MachineSpec> specs = {{"m", "x", "nearest_centroid", {{{"R"}, {"B"}}}, {}, {}}};
  const auto cascade =
      storm::select(ds, split, specs, "R", "x", StormConfig{}, DensityConfig{});
  REQUIRE(cascade.nodes.size() == 1);
  CHECK(cascade.nodes[0].decision == CascadeNode::Decision::stop);
  CHECK(cascade.nodes[0].gini_at_node == 0.0);
  CHECK(cascade.report.rounds[0].stop_reason == "rare block pure (gini below epsilon_g)");
  CHECK(cascade.report.final_validation.f1 == doctest::Approx(1.0));
}

TEST_CASE("gini gating: 0.375 recurses under eps 0.2 and stops under eps 0.5") {
  const auto fixture = gini_fixture();

  StormConfig loose;
  loose.epsilon_g = 0.5;
  const auto stopped = storm::select(fixture.dataset, fixture.split, fixture.specs, "R", "v",
                                     loose, DensityConfig{});
  REQUIRE(stopped.nodes.size() == 1);
  CHECK(stopped.nodes[0].gini_at_node == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(stopped.nodes[0].decision == CascadeNode::Decision::stop);

  StormConfig strict;
  strict.epsilon_g = 0.2;
  const auto recursed = storm::select(fixture.dataset, fixture.split, fixture.specs, "R", "v",
                                      strict, DensityConfig{});
  REQUIRE(recursed.nodes.size() >= 2);
  CHECK(recursed.nodes[0].gini_at_node == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(recursed.nodes[0].decision == CascadeNode::Decision::recurse);
  CHECK(recursed.nodes.back().decision == CascadeNode::Decision::stop);
}

TEST_CASE("a downstream rare call above the override threshold wins") {
  const auto cascade = override_cascade(19);  // rare score 19/20 = 0.95
  const auto probe = instance_with("p", "noise", {{"u", {0.0, 1.0}}, {"d", {0.0, 0.0}}});
  const auto pred = storm::cascade_predict(cascade, probe);
  CHECK(pred.label == "SOZ");
  CHECK(pred.overridden);
  CHECK(pred.score == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(pred.decided_by == "detector");
}

TEST_CASE("a downstream rare call below the override threshold is ignored") {
  const auto cascade = override_cascade(17);  // rare score 17/20 = 0.85
  const auto probe = instance_with("p", "noise", {{"u", {0.0, 1.0}}, {"d", {0.0, 0.0}}});
  const auto pred = storm::cascade_predict(cascade, probe);
  CHECK(pred.label == "noise");
  CHECK_FALSE(pred.overridden);
  CHECK(pred.decided_by == "gate");
}

TEST_CASE("an override threshold above one reduces to pure hierarchical routing") {
  auto cascade = override_cascade(19);
  cascade.override_score = 1.0 + 1e-9;
  const auto probe = instance_with("p", "noise", {{"u", {0.0, 1.0}}, {"d", {0.0, 0.0}}});
  CHECK(storm::cascade_predict(cascade, probe).label == "noise");
}

TEST_CASE("a depth-one cascade maps its rare block straight to the rare label") {
  auto cascade = override_cascade(19);
  cascade.nodes.erase(cascade.nodes.begin());  // keep only the rare detector
  const auto probe = instance_with("p", "SOZ", {{"d", {0.0, 0.0}}});
  const auto pred = storm::cascade_predict(cascade, probe);
  CHECK(pred.label == "SOZ");
  CHECK_FALSE(pred.overridden);
  CHECK(pred.score == doctest::Approx(0.95).epsilon(1e-12));
}

TEST_CASE("routing to a multi-class terminal block returns the majority, flagged coarse") {
  std::vector<testutil::Row> rows = {
      {"n0", "noise", {{"u", {0.0, 0.0}}}},
      {"n1", "noise", {{"u", {0.0, 2.0}}}},
      {"x0", "RSN", {{"u", {10.0, 0.0}}}},
      {"x1", "RSN", {{"u", {10.0, 2.0}}}},
      {"x2", "SOZ", {{"u", {10.0, 1.0}}}},
  };
  const auto ds = testutil::dataset_of({"noise", "RSN", "SOZ"}, "SOZ", rows);
  auto machine = storm::train(
      {"gate", "u", "nearest_centroid", {{{"noise"}, {"RSN", "SOZ"}}}, {}, {}}, ds);
  Cascade cascade;
  cascade.rare_class = "SOZ";
  CascadeNode node;
  node.machine = std::move(machine);
  node.selected_block = 1;
  node.decision = CascadeNode::Decision::stop;
  cascade.nodes.push_back(std::move(node));

  const auto pred =
      storm::cascade_predict(cascade, instance_with("p", "SOZ", {{"u", {10.0, 1.5}}}));
  CHECK(pred.label == "RSN");  // block majority among {RSN, RSN, SOZ}
  CHECK(pred.coarse);
}

TEST_CASE("cascade_predict rejects instances missing a required view by name") {
  const auto cascade = override_cascade(19);
  const auto probe = instance_with("p", "noise", {{"u", {0.0, 1.0}}});
  CHECK_THROWS_WITH_AS(storm::cascade_predict(cascade, probe), doctest::Contains("'d'"),
                       storm::InputError);
}

TEST_CASE("evaluate computes rare-vs-rest confusion metrics") {
  // 1-NN memorizer: everything at (0) is called rare, everything at (10) not.
  const auto train_ds = testutil::points({"R", "O"}, "R", "x", {{"R", {0.0}}, {"O", {10.0}}});
  auto machine =
      storm::train({"m", "x", "knn", {{{"R"}, {"O"}}}, {{"k", 1.0}}, {}}, train_ds);
  Cascade cascade;
  cascade.rare_class = "R";
  CascadeNode node;
  node.machine = std::move(machine);
  node.selected_block = 0;
  node.decision = CascadeNode::Decision::stop;
  cascade.nodes.push_back(std::move(node));

  SUBCASE("perfect predictions give all ones") {
    const auto test = testutil::points({"R", "O"}, "R", "x",
                                       {{"R", {0.0}}, {"R", {0.0}}, {"O", {10.0}}});
    const auto m = storm::evaluate(cascade, test, "R");
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.f1 == 1.0);
  }

  SUBCASE("tp=2 fp=1 fn=1 over 10 instances") {
    std::vector<std::pair<std::string, storm::FeatureVector>> pts = {
        {"R", {0.0}}, {"R", {0.0}},   // TP
        {"O", {0.0}},                 // FP
        {"R", {10.0}},                // FN
    };
    for (int i = 0; i < 6; ++i) {
      pts.push_back({"O", {10.0}});  // TN
    }
    const auto test = testutil::points({"R", "O"}, "R", "x", pts);
    const auto m = storm::evaluate(cascade, test, "R");
    CHECK(m.tp == 2);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.tn == 6);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.sensitivity == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.accuracy == doctest::Approx(0.8));
    CHECK_FALSE(m.no_positive_predictions);
  }

  SUBCASE("no rare predictions flag precision zero") {
    const auto test = testutil::points({"R", "O"}, "R", "x",
                                       {{"R", {10.0}}, {"R", {10.0}}, {"O", {10.0}}});
    const auto m = storm::evaluate(cascade, test, "R");
    CHECK(m.no_positive_predictions);
    CHECK(m.precision == 0.0);
    CHECK(m.sensitivity == 0.0);
    CHECK(m.f1 == 0.0);
  }
}

TEST_CASE("identical specs tie and resolve deterministically by id") {
  const auto ds = testutil::points(
      {"R", "B"}, "R", "x",
      {{"R", {0.0}}, {"R", {1.0}}, {"R", {0.5}}, {"B", {10.0}}, {"B", {11.0}}, {"B", {12.0}},
       {"R", {0.7}}, {"B", {11.5}}});
  const Split split = split_of({"i0", "i1", "i2", "i3", "i4", "i5"}, {"i6", "i7"});
  const LabelPartition partition{{{"R"}, {"B"}}};
  std::vector<MachineSpec> forward = {
      {"m_a", "x", "nearest_centroid", partition, {}, {}},
      {"m_b", "x", "nearest_centroid", partition, {}, {}},
  };
  std::vector<MachineSpec> backward = {forward[1], forward[0]};

  const auto first = storm::select(ds, split, forward, "R", "x", StormConfig{}, DensityConfig{});
  const auto second =
      storm::select(ds, split, backward, "R", "x", StormConfig{}, DensityConfig{});

  const auto& row0 = first.report.rounds[0].candidates;
  CHECK(row0[0].tied);
  CHECK(row0[1].tied);
  CHECK(row0[0].confidence.has_value());
  CHECK(first.report.rounds[0].chosen == "m_a");
  CHECK(second.report.rounds[0].chosen == "m_a");
  CHECK(first.nodes.size() == second.nodes.size());
  CHECK(first.report.final_validation.f1 == second.report.final_validation.f1);
}

TEST_CASE("rounds conserve the pool: kept plus routed away equals the previous pool") {
  const auto fixture = gini_fixture();
  StormConfig strict;
  strict.epsilon_g = 0.2;
  const auto cascade = storm::select(fixture.dataset, fixture.split, fixture.specs, "R", "v",
                                     strict, DensityConfig{});
  const auto& rounds = cascade.report.rounds;
  REQUIRE(rounds.size() >= 2);
  for (std::size_t i = 0; i + 1 < rounds.size(); ++i) {
    CHECK(rounds[i].pool_size - rounds[i].routed_away_count == rounds[i + 1].pool_size);
  }
}

TEST_CASE("assess ranks machines by gain and the identity machine gains nothing") {
  const auto ds = testutil::random_dataset(31, 3, 10, 3);
  auto identity = storm::train(
      {"id", "x", "identity", LabelPartition::identity(ds.class_set()), {}, {}}, ds);
  auto centroid = storm::train(
      {"cen", "x", "nearest_centroid", LabelPartition::identity(ds.class_set()), {}, {}}, ds);
  const auto result =
      storm::assess(ds, {identity.get(), centroid.get()}, "x", DensityConfig{});
  REQUIRE(result.machines.size() == 2);
  // The identity machine reproduces the raw view: EIG exactly zero.
  for (const auto& row : result.machines) {
    if (row.report.source == "id") {
      CHECK(row.eig == 0.0);
    }
  }
  CHECK(result.machines[0].eig >= result.machines[1].eig);
}

TEST_CASE("stratified splits are deterministic and cover every class on both sides") {
  const auto ds = testutil::random_dataset(41, 3, 9, 2);
  const auto a = storm::make_stratified_split(ds, 0.3, 7);
  const auto b = storm::make_stratified_split(ds, 0.3, 7);
  CHECK(a.train_ids == b.train_ids);
  CHECK(a.validation_ids == b.validation_ids);
  CHECK(a.train_ids.size() + a.validation_ids.size() == ds.size());

  const auto train = ds.subset_by_ids(a.train_ids);
  const auto val = ds.subset_by_ids(a.validation_ids);
  for (const auto& cls : ds.class_set().classes) {
    CHECK(train.class_count(cls) >= 1);
    CHECK(val.class_count(cls) >= 1);
  }
  const auto c = storm::make_stratified_split(ds, 0.3, 8);
  CHECK(c.train_ids != a.train_ids);  // the seed matters
}

TEST_CASE("select validates its configuration and inputs") {
  const auto fixture = gini_fixture();
  StormConfig bad;
  bad.max_depth = 0;
  CHECK_THROWS_AS(storm::select(fixture.dataset, fixture.split, fixture.specs, "R", "v", bad,
                                DensityConfig{}),
                  storm::InputError);

  std::vector<MachineSpec> no_rare = {
      {"m", "v", "nearest_centroid", {{{"B"}}}, {}, {}}};
  CHECK_THROWS_WITH_AS(storm::select(fixture.dataset, fixture.split, no_rare, "R", "v",
                                     StormConfig{}, DensityConfig{}),
                       doctest::Contains("rare"), storm::InputError);

  Split rare_free = fixture.split;
  rare_free.train_ids = {"b1", "b2", "b3", "b4"};
  CHECK_THROWS_AS(storm::select(fixture.dataset, rare_free, fixture.specs, "R", "v",
                                StormConfig{}, DensityConfig{}),
                  storm::InputError);
}

TEST_CASE("cascades serialize to JSON and back with identical predictions") {
  const auto fixture = gini_fixture();
  const auto cascade = storm::select(fixture.dataset, fixture.split, fixture.specs, "R", "v",
                                     StormConfig{}, DensityConfig{});
  const auto dumped = cascade.to_json().dump(2);
  const auto restored = Cascade::from_json(storm::Json::parse(dumped));
  CHECK(restored.to_json().dump(2) == dumped);
  for (const auto& inst : fixture.dataset.instances()) {
    CHECK(storm::cascade_predict(cascade, inst).label ==
          storm::cascade_predict(restored, inst).label);
  }
}
