#include <doctest.h>

#include <cmath>

#include "storm/machines.hpp"
#include "testutil.hpp"

using storm::LabelPartition;
using storm::MachineSpec;

namespace {

MachineSpec centroid_spec(std::string id, std::string view, LabelPartition partition) {
  return {std::move(id), std::move(view), "nearest_centroid", std::move(partition), {}, {}};
}

// Two separated clusters: A around the origin, B around (10, 0).
storm::Dataset two_clusters() {
  return testutil::points({"A", "B"}, "A", "x",
                          {{"A", {0.0, 0.0}},
                           {"A", {0.0, 2.0}},
                           {"B", {10.0, 0.0}},
                           {"B", {10.0, 2.0}},
                           {"B", {9.0, 1.0}}});
}

}  // namespace

TEST_CASE("nearest-centroid training computes block means") {
  const auto ds = testutil::points({"A", "B"}, "A", "x",
                                   {{"A", {0.0, 0.0}}, {"A", {0.0, 2.0}}, {"B", {10.0, 0.0}}});
  const auto machine = storm::train(centroid_spec("m", "x", {{{"A"}, {"B"}}}), ds);

  // Representation is the centroid-distance vector: at centroid (0,1) the
  // distances are 0 and sqrt(101).
  storm::Instance probe;
  probe.id = "p";
  probe.label = "A";
  probe.views["x"] = {0.0, 1.0};
  const auto rep = machine->representation(probe);
  REQUIRE(rep.size() == 2);
  CHECK(rep[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rep[1] == doctest::Approx(std::sqrt(101.0)).epsilon(1e-12));

  const auto pred = machine->predict(probe);
  CHECK(pred.block == 0);
  CHECK(pred.score >= 0.5);  // at a centroid the winning score dominates
}

TEST_CASE("an instance equidistant from two centroids goes to the lower block at 0.5") {
  const auto ds = testutil::points({"A", "B"}, "A", "x",
                                   {{"A", {0.0, 0.0}}, {"A", {0.0, 2.0}},
                                    {"B", {10.0, 0.0}}, {"B", {10.0, 2.0}}});
  const auto machine = storm::train(centroid_spec("m", "x", {{{"A"}, {"B"}}}), ds);
  storm::Instance probe;
  probe.id = "p";
  probe.label = "A";
  probe.views["x"] = {5.0, 1.0};  // midway between centroids (0,1) and (10,1)
  const auto pred = machine->predict(probe);
  CHECK(pred.block == 0);
  CHECK(pred.score == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("1-NN reproduces training labels exactly") {
  const auto ds = two_clusters();
  MachineSpec spec{"m", "x", "knn", {{{"A"}, {"B"}}}, {{"k", 1.0}}, {}};
  const auto machine = storm::train(spec, ds);
  for (const auto& inst : ds.instances()) {
    const auto pred = machine->predict(inst);
    CHECK(ds.class_set().classes[pred.block == 0 ? 0 : 1] == inst.label);
  }
}

TEST_CASE("knn votes are distance-weighted shares") {
  // Three equidistant neighbours with blocks {0, 0, 1}: block 0 wins at 2/3.
  const auto ds = testutil::points({"A", "B"}, "A", "x",
                                   {{"A", {3.0, 4.0}}, {"A", {-3.0, 4.0}}, {"B", {0.0, -5.0}}});
  MachineSpec spec{"m", "x", "knn", {{{"A"}, {"B"}}}, {{"k", 3.0}}, {}};
  const auto machine = storm::train(spec, ds);
  storm::Instance probe;
  probe.id = "p";
  probe.label = "A";
  probe.views["x"] = {0.0, 0.0};  // all three at distance 5
  const auto pred = machine->predict(probe);
  CHECK(pred.block == 0);
  CHECK(pred.score == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("an untrained linear machine scores every block equally") {
  const auto ds = two_clusters();
  MachineSpec spec{"m", "x", "linear", {{{"A"}, {"B"}}}, {{"iterations", 0.0}}, {}};
  const auto machine = storm::train(spec, ds);
  const auto scores = machine->block_scores(ds.instances()[0]);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(scores[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(storm::confidence(*machine, ds) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a trained linear machine separates the clusters") {
  const auto ds = two_clusters();
  MachineSpec spec{"m", "x", "linear", {{{"A"}, {"B"}}}, {}, {}};
  const auto machine = storm::train(spec, ds);
  std::size_t correct = 0;
  for (const auto& inst : ds.instances()) {
    const auto pred = machine->predict(inst);
    if (ds.class_set().classes[pred.block] == inst.label) {
      ++correct;
    }
  }
  CHECK(correct == ds.size());
}

TEST_CASE("a single-block partition yields a one-dimensional representation") {
  const auto ds = two_clusters();
  const auto machine =
      storm::train(centroid_spec("m", "x", LabelPartition::single_block(ds.class_set())), ds);
  CHECK(machine->representation(ds.instances()[0]).size() == 1);
  CHECK(machine->predict(ds.instances()[0]).score == 1.0);
}

TEST_CASE("identical instances get identical representations") {
  const auto ds = two_clusters();
  const auto machine = storm::train(centroid_spec("m", "x", {{{"A"}, {"B"}}}), ds);
  storm::Instance p1, p2;
  p1.id = "p1";
  p2.id = "p2";
  p1.label = p2.label = "A";
  p1.views["x"] = p2.views["x"] = {1.5, 0.5};
  CHECK(machine->representation(p1) == machine->representation(p2));
}

TEST_CASE("the identity kind exposes the raw view as its representation") {
  const auto ds = two_clusters();
  MachineSpec spec{"m", "x", "identity", {{{"A"}, {"B"}}}, {}, {}};
  const auto machine = storm::train(spec, ds);
  CHECK(machine->representation(ds.instances()[0]) == ds.instances()[0].view("x"));
  // Predictions still come from the centroid machinery.
  CHECK(machine->predict(ds.instances()[0]).block == 0);
}

TEST_CASE("confidence is the mean correct-block score") {
  // Rings of 10 lattice points at exact distance 5 make the shares exact:
  // 9/1, 7/3 and 8/2 rings give scores 0.9, 0.7 and 0.8 for the correct
  // block; the mean is 0.8.
  const std::vector<std::pair<int, int>> ring5 = {{3, 4},  {-3, 4},  {3, -4}, {-3, -4},
                                                  {4, 3},  {-4, 3},  {4, -3}, {-4, -3},
                                                  {5, 0},  {0, 5}};
  std::vector<testutil::Row> rows;
  int next = 0;
  auto add_ring = [&](double cx, double cy, int correct) {
    for (int i = 0; i < 10; ++i) {
      rows.push_back({"t" + std::to_string(next++), i < correct ? "A" : "B",
                      {{"x", {cx + ring5[i].first, cy + ring5[i].second}}}});
    }
  };
  add_ring(0.0, 0.0, 9);
  add_ring(100.0, 0.0, 7);
  add_ring(200.0, 0.0, 8);
  const auto train_ds = testutil::dataset_of({"A", "B"}, "A", rows);

  MachineSpec spec{"m", "x", "knn", {{{"A"}, {"B"}}}, {{"k", 10.0}}, {}};
  const auto machine = storm::train(spec, train_ds);

  const auto validation = testutil::points(
      {"A", "B"}, "A", "x", {{"A", {0.0, 0.0}}, {"A", {100.0, 0.0}}, {"A", {200.0, 0.0}}});
  CHECK(storm::confidence(*machine, validation) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("confidence is exactly one when every correct block takes all votes") {
  const auto ds = two_clusters();
  MachineSpec spec{"m", "x", "knn", {{{"A"}, {"B"}}}, {{"k", 2.0}}, {}};
  const auto machine = storm::train(spec, ds);
  const auto validation = testutil::points({"A", "B"}, "A", "x",
                                           {{"A", {0.1, 1.0}}, {"B", {9.9, 1.0}}});
  CHECK(storm::confidence(*machine, validation) == 1.0);
}

TEST_CASE("uncovered validation labels drag confidence down") {
  const auto ds = testutil::points({"A", "B", "C"}, "C", "x",
                                   {{"A", {0.0, 0.0}}, {"A", {0.0, 2.0}},
                                    {"B", {10.0, 0.0}}, {"B", {10.0, 2.0}},
                                    {"C", {5.0, 10.0}}});
  MachineSpec spec{"m", "x", "knn", {{{"A"}, {"B"}}}, {{"k", 1.0}}, {}};
  const auto machine = storm::train(spec, ds);
  CHECK(machine->summary().excluded_uncovered == 1);

  const auto validation = testutil::points({"A", "B", "C"}, "C", "x",
                                           {{"A", {0.0, 1.0}}, {"C", {5.0, 10.0}}});
  // The covered instance scores 1.0, the uncovered one 0.
  CHECK(storm::confidence(*machine, validation) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nearest-centroid predictions are translation invariant") {
  storm::Rng rng(17);
  const auto ds = testutil::random_dataset(99, 3, 10, 3);
  const auto machine =
      storm::train(centroid_spec("m", "x", LabelPartition::identity(ds.class_set())), ds);

  std::vector<storm::Instance> shifted = ds.instances();
  const storm::FeatureVector offset = {13.5, -7.25, 101.0};
  for (auto& inst : shifted) {
    auto& x = inst.views["x"];
    for (std::size_t d = 0; d < x.size(); ++d) {
      x[d] += offset[d];
    }
  }
  const storm::Dataset shifted_ds(ds.class_set(), shifted);
  const auto shifted_machine =
      storm::train(centroid_spec("m", "x", LabelPartition::identity(ds.class_set())), shifted_ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(machine->predict(ds.instances()[i]).block ==
          shifted_machine->predict(shifted_ds.instances()[i]).block);
  }
}

TEST_CASE("smote inside training balances the rare block") {
  storm::Rng rng(3);
  std::vector<testutil::Row> rows;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({"a" + std::to_string(i), "A",
                    {{"x", {rng.gaussian(), rng.gaussian()}}}});
  }
  for (int i = 0; i < 4; ++i) {
    rows.push_back({"r" + std::to_string(i), "R",
                    {{"x", {8.0 + rng.gaussian(), 8.0 + rng.gaussian()}}}});
  }
  const auto ds = testutil::dataset_of({"A", "R"}, "R", rows);

  storm::SmoteConfig smote;
  smote.seed = 4;
  MachineSpec spec{"m", "x", "nearest_centroid", {{{"R"}, {"A"}}}, {}, smote};
  const auto machine = storm::train(spec, ds);
  CHECK(machine->summary().synthetic_added == 16);
  CHECK(machine->summary().block_counts[0] == 20);  // rare block after SMOTE
  CHECK(machine->summary().block_counts[1] == 20);
  CHECK_FALSE(machine->summary().smote_skipped);
}

TEST_CASE("smote is skipped when the minority cannot be interpolated") {
  const auto ds = testutil::points({"A", "R"}, "R", "x",
                                   {{"A", {0.0}}, {"A", {1.0}}, {"A", {2.0}}, {"R", {9.0}}});
  storm::SmoteConfig smote;
  MachineSpec spec{"m", "x", "nearest_centroid", {{{"R"}, {"A"}}}, {}, smote};
  const auto machine = storm::train(spec, ds);
  CHECK(machine->summary().smote_skipped);
  CHECK(machine->summary().synthetic_added == 0);
}

TEST_CASE("training rejects structural problems") {
  const auto ds = two_clusters();
  CHECK_THROWS_AS(storm::train(centroid_spec("m", "nope", {{{"A"}, {"B"}}}), ds),
                  storm::InputError);  // missing view
  CHECK_THROWS_AS(storm::train({"m", "x", "wat", {{{"A"}, {"B"}}}, {}, {}}, ds),
                  storm::InputError);  // unknown kind
  CHECK_THROWS_AS(storm::train({"m", "x", "knn", {{{"A"}, {"B"}}}, {{"zap", 1.0}}, {}}, ds),
                  storm::InputError);  // unknown hyperparameter
  // Partition whose second block has no training instances.
  const auto only_a = testutil::points({"A", "B"}, "A", "x", {{"A", {0.0}}, {"A", {1.0}}});
  CHECK_THROWS_AS(storm::train(centroid_spec("m", "x", {{{"A"}, {"B"}}}), only_a),
                  storm::InputError);
}

TEST_CASE("predicting without the machine's view is rejected") {
  const auto ds = two_clusters();
  const auto machine = storm::train(centroid_spec("m", "x", {{{"A"}, {"B"}}}), ds);
  storm::Instance probe;
  probe.id = "p";
  probe.label = "A";
  probe.views["y"] = {0.0};
  CHECK_THROWS_AS(machine->predict(probe), storm::InputError);
}

TEST_CASE("machines serialize to JSON and back without changing behaviour") {
  const auto ds = two_clusters();
  std::vector<MachineSpec> specs = {
      centroid_spec("c", "x", {{{"A"}, {"B"}}}),
      {"k", "x", "knn", {{{"A"}, {"B"}}}, {{"k", 3.0}}, {}},
      {"l", "x", "linear", {{{"A"}, {"B"}}}, {{"iterations", 50.0}}, {}},
      {"i", "x", "identity", {{{"A"}, {"B"}}}, {}, {}},
  };
  for (const auto& spec : specs) {
    const auto machine = storm::train(spec, ds);
    const auto dumped = machine->to_json().dump();
    const auto restored = storm::TrainedMachine::from_json(storm::Json::parse(dumped));
    for (const auto& inst : ds.instances()) {
      CHECK(machine->predict(inst).block == restored->predict(inst).block);
      CHECK(machine->predict(inst).score == restored->predict(inst).score);
      CHECK(machine->representation(inst) == restored->representation(inst));
    }
    CHECK(restored->to_json().dump() == dumped);
  }
}

TEST_CASE("discriminative score rewards separated classes") {
  const std::vector<storm::FeatureVector> separated = {{0.0, 0.0}, {0.1, 0.0},
                                                       {10.0, 0.0}, {10.1, 0.0}};
  const std::vector<std::size_t> ids = {0, 0, 1, 1};
  CHECK(storm::discriminative_score(separated, ids) > 5.0);
  const std::vector<storm::FeatureVector> mixed = {{0.0, 0.0}, {10.0, 0.0},
                                                   {0.1, 0.0}, {10.1, 0.0}};
  CHECK(storm::discriminative_score(mixed, ids) < 1.0);
}
