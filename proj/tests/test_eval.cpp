#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scipnet/eval.hpp"

using namespace scipnet;

namespace {

SimResult small_sim(int n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_subjects = n;
  cfg.gamma = 2.0;
  cfg.seed = seed;
  return simulate(cfg);
}

ModelBundle untrained_bundle(const SimResult& sim) {
  TrainConfig tc;
  tc.epochs = 0;
  tc.d_z = 4;
  tc.d_hidden = 6;
  tc.seed = 3;
  return run_pipeline(sim.trajectories, tc).bundle;
}

InterventionPlan simple_plan(double start, int d_a) {
  InterventionPlan plan;
  plan.start = start;
  plan.jump_times = {start + 1.0, start + 2.0};
  plan.values = Eigen::MatrixXd::Zero(2, d_a);
  plan.values(0, 0) = 1.0;
  plan.values(1, d_a - 1) = 1.0;
  plan.horizon = start + 2.0;
  return plan;
}

}  // namespace

TEST_CASE("capo predictions are deterministic and reject bad plans") {
  const SimResult sim = small_sim(4, 17);
  const ModelBundle bundle = untrained_bundle(sim);
  const Trajectory& traj = sim.trajectories[0];
  const InterventionPlan plan = simple_plan(15.0, traj.da());

  const Eigen::VectorXd p1 = predict_capo(bundle, traj, 15.0, plan);
  const Eigen::VectorXd p2 = predict_capo(bundle, traj, 15.0, plan);
  CHECK(p1 == p2);
  CHECK(p1.allFinite());

  CHECK_THROWS_WITH_AS(predict_capo(bundle, traj, 14.0, plan),
                       "plan does not start at the cutoff",
                       std::invalid_argument);
  InterventionPlan degenerate = plan;
  degenerate.horizon = degenerate.start;
  CHECK_THROWS_WITH_AS(predict_capo(bundle, traj, 15.0, degenerate),
                       "empty plan horizon", std::invalid_argument);
}

TEST_CASE("duplicating every record leaves the rmse unchanged") {
  const SimResult sim = small_sim(4, 17);
  const ModelBundle bundle = untrained_bundle(sim);
  Rng rng(9);
  const std::vector<EvalRecord> records =
      make_eval_records(sim, SimConfig{}, 15.0, 2.0, 3, rng);
  std::vector<EvalRecord> doubled = records;
  doubled.insert(doubled.end(), records.begin(), records.end());
  const double r1 = evaluate_records(bundle, sim.trajectories, records);
  const double r2 = evaluate_records(bundle, sim.trajectories, doubled);
  CHECK(r1 == doctest::Approx(r2).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate_records(bundle, sim.trajectories, {}),
                  std::invalid_argument);
}

TEST_CASE("a zeroed outcome head reduces the rmse to the target spread") {
  const SimResult sim = small_sim(4, 17);
  ModelBundle bundle = untrained_bundle(sim);
  bundle.dec.head.W.setZero();
  bundle.dec.head.b.setZero();
  Rng rng(9);
  const std::vector<EvalRecord> records =
      make_eval_records(sim, SimConfig{}, 15.0, 2.0, 3, rng);
  const double rmse = evaluate_records(bundle, sim.trajectories, records);
  double sq = 0.0;
  for (const EvalRecord& r : records) {
    const double z =
        (r.ground_truth - bundle.norm.y_mean(0)) / bundle.norm.y_std(0);
    sq += z * z;
  }
  const double oracle = std::sqrt(sq / static_cast<double>(records.size()));
  CHECK(rmse == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("evaluation records survive a save and load cycle") {
  const SimResult sim = small_sim(3, 17);
  Rng rng(9);
  const std::vector<EvalRecord> records =
      make_eval_records(sim, SimConfig{}, 15.0, 2.0, 2, rng);
  const std::string path =
      std::filesystem::temp_directory_path() / "records_rt.jsonl";
  save_records(records, path);
  const std::vector<EvalRecord> back = load_records(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].subject == records[i].subject);
    CHECK(back[i].cutoff == records[i].cutoff);
    CHECK(back[i].ground_truth == records[i].ground_truth);
    CHECK(back[i].plan.jump_times == records[i].plan.jump_times);
    CHECK(back[i].plan.values == records[i].plan.values);
    CHECK(back[i].plan.start == records[i].plan.start);
    CHECK(back[i].plan.horizon == records[i].plan.horizon);
  }
  std::remove(path.c_str());
}

TEST_CASE("record generation yields one block per subject") {
  const SimResult sim = small_sim(5, 17);
  Rng rng(9);
  const std::vector<EvalRecord> records =
      make_eval_records(sim, SimConfig{}, 15.0, 3.0, 4, rng);
  REQUIRE(records.size() == 20);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].subject == static_cast<int>(i / 4));
    CHECK(records[i].cutoff == 15.0);
    CHECK(records[i].plan.start == 15.0);
    CHECK(std::isfinite(records[i].ground_truth));
  }
}

TEST_CASE("sweep reports mark failed cells instead of aborting") {
  std::vector<SweepRow> rows(2);
  rows[0] = {"scip", 4.0, 0.0, 2.0, 1, 0.75, 100, false};
  rows[1] = {"cip", 4.0, 0.0, 2.0, 1, 0.0, 0, true};
  const std::string path =
      std::filesystem::temp_directory_path() / "report_test.csv";
  write_sweep_csv(rows, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  CHECK(text ==
        "variant,gamma,omega,horizon,seed,rmse,n_pairs\n"
        "scip,4,0,2,1,0.75,100\n"
        "cip,4,0,2,1,failed,0\n");
  std::remove(path.c_str());
}

TEST_CASE("a tiny sweep produces a full factorial of finite rows") {
  SweepConfig sc;
  sc.gammas = {0.0};
  sc.horizons = {1.0, 2.0};
  sc.seeds = {1};
  sc.variants = {"scip", "unweighted"};
  sc.n_train = 12;
  sc.n_test = 6;
  sc.plans_per_prefix = 2;
  sc.base.epochs = 1;
  sc.base.d_z = 4;
  sc.base.d_hidden = 6;
  const std::vector<SweepRow> rows = sweep(sc);
  REQUIRE(rows.size() == 4);
  for (const SweepRow& r : rows) {
    CHECK(!r.failed);
    CHECK(std::isfinite(r.rmse));
    CHECK(r.n_pairs == 12);
  }
  // shared stages: same cell, different variants, same record count
  CHECK(rows[0].horizon == rows[1].horizon);
  CHECK(rows[0].variant != rows[1].variant);
}
