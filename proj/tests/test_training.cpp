#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "helpers.hpp"
#include "scipnet/simulator.hpp"
#include "scipnet/training.hpp"

using namespace scipnet;
using scipnet::testing::make_dense_traj;

namespace {

std::vector<Trajectory> tiny_cohort(int n, double gamma, std::uint64_t seed,
                                    double decision_rate = 1.0) {
  SimConfig cfg;
  cfg.n_subjects = n;
  cfg.gamma = gamma;
  cfg.seed = seed;
  cfg.decision_rate = decision_rate;
  return simulate(cfg).trajectories;
}

TrainConfig tiny_config(int epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.d_z = 4;
  tc.d_hidden = 6;
  tc.seed = 3;
  return tc;
}

bool params_equal(std::vector<ParamRef> a, std::vector<ParamRef> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (*a[i].value != *b[i].value) return false;
  return true;
}

}  // namespace

TEST_CASE("normalization statistics cover observed entries only") {
  std::vector<int> y_mask = {1, 0, 1, 0};
  std::vector<int> a_mask = {0, 1, 0, 0};
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 2);
  a(1, 1) = 1.0;
  const Trajectory t = scipnet::testing::make_traj(3, y_mask, a_mask, a);
  const Normalization norm = compute_normalization({t});
  // observed outcomes: 1 and 3
  CHECK(norm.y_mean(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(norm.y_std(0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto scaled = normalize_dataset({t}, norm);
  CHECK(scaled[0].y(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(scaled[0].y(2, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isnan(scaled[0].y(1, 0)));
}

TEST_CASE("zero training epochs return the initialization unchanged") {
  const auto data = tiny_cohort(8, 0.0, 5);
  const TrainConfig tc = tiny_config(0);
  const PipelineResult a = run_pipeline(data, tc);
  ModelBundle b = make_bundle(data, tc);
  ModelBundle a_copy = a.bundle;
  CHECK(params_equal(a_copy.all_params(), b.all_params()));
}

TEST_CASE("the pipeline is deterministic under a fixed seed") {
  const auto data = tiny_cohort(10, 2.0, 5);
  const TrainConfig tc = tiny_config(2);
  PipelineResult a = run_pipeline(data, tc);
  PipelineResult b = run_pipeline(data, tc);
  CHECK(params_equal(a.bundle.all_params(), b.bundle.all_params()));
  CHECK(a.cache.weights == b.cache.weights);
}

TEST_CASE("scip and cip share everything except the decoder") {
  const auto data = tiny_cohort(10, 2.0, 5);
  TrainConfig tc = tiny_config(2);
  tc.variant = "scip";
  PipelineResult scip = run_pipeline(data, tc);
  tc.variant = "cip";
  PipelineResult cip = run_pipeline(data, tc);
  CHECK(params_equal(scip.bundle.s.params("s"), cip.bundle.s.params("s")));
  CHECK(params_equal(scip.bundle.w.params("w"), cip.bundle.w.params("w")));
  CHECK(params_equal(scip.bundle.enc.params("e"), cip.bundle.enc.params("e")));
  CHECK(!params_equal(scip.bundle.dec.params("d"), cip.bundle.dec.params("d")));
}

TEST_CASE("empty dataset fails before any training") {
  CHECK_THROWS_AS(run_pipeline({}, tiny_config(1)), std::invalid_argument);
}

TEST_CASE("unweighted variant caches exactly one for every instance") {
  const auto data = tiny_cohort(6, 2.0, 5);
  const TrainConfig tc = tiny_config(0);
  const ModelBundle b = make_bundle(data, tc);
  const auto norm_data = normalize_dataset(data, b.norm);
  std::vector<Instance> instances;
  std::vector<const Trajectory*> traj_of;
  for (const auto& tr : norm_data)
    for (auto& inst : slice_instances(tr, {1.0})) {
      traj_of.push_back(&tr);
      instances.push_back(std::move(inst));
    }
  REQUIRE(!instances.empty());
  const WeightCache cache =
      cache_weights(traj_of, instances, b.s, b.w, "unweighted", tc);
  for (double w : cache.weights) CHECK(w == 1.0);
  CHECK_THROWS_AS(cache_weights(traj_of, instances, b.s, b.w, "bogus", tc),
                  std::invalid_argument);
}

TEST_CASE("instances without decisions in the window get weight one") {
  // decisions never fire, so every factual plan is an empty product
  const auto data = tiny_cohort(4, 0.0, 5, 0.0);
  const TrainConfig tc = tiny_config(0);
  const ModelBundle b = make_bundle(data, tc);
  const auto norm_data = normalize_dataset(data, b.norm);
  std::vector<Instance> instances;
  std::vector<const Trajectory*> traj_of;
  for (const auto& tr : norm_data)
    for (auto& inst : slice_instances(tr, {1.0})) {
      traj_of.push_back(&tr);
      instances.push_back(std::move(inst));
    }
  REQUIRE(!instances.empty());
  const WeightCache cache =
      cache_weights(traj_of, instances, b.s, b.w, "scip", tc);
  for (double w : cache.raw) CHECK(w == 1.0);
  for (double w : cache.weights) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matching stability and weight probabilities cancel to unit weights") {
  const auto data = tiny_cohort(6, 2.0, 5);
  const TrainConfig tc = tiny_config(0);
  ModelBundle b = make_bundle(data, tc);
  // zeroed heads emit probability one half everywhere, so both networks agree
  // and the stabilized product telescopes to one
  for (SWNet* net : {&b.s, &b.w}) {
    net->head_intensity.W.setZero();
    net->head_intensity.b.setZero();
    net->head_propensity.W.setZero();
    net->head_propensity.b.setZero();
  }
  const auto norm_data = normalize_dataset(data, b.norm);
  std::vector<Instance> instances;
  std::vector<const Trajectory*> traj_of;
  for (const auto& tr : norm_data)
    for (auto& inst : slice_instances(tr, {2.0})) {
      traj_of.push_back(&tr);
      instances.push_back(std::move(inst));
    }
  REQUIRE(!instances.empty());
  const WeightCache cache =
      cache_weights(traj_of, instances, b.s, b.w, "scip", tc);
  for (double r : cache.raw) CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("doubling cached weights leaves normalized weights bitwise equal") {
  const auto data = tiny_cohort(10, 3.0, 5);
  TrainConfig tc = tiny_config(1);
  PipelineResult r = run_pipeline(data, tc);
  std::vector<double> doubled = r.cache.raw;
  for (double& v : doubled) v *= 2.0;
  const std::vector<double> n1 = truncate_normalize(r.cache.raw);
  const std::vector<double> n2 = truncate_normalize(doubled);
  REQUIRE(n1.size() == n2.size());
  for (std::size_t i = 0; i < n1.size(); ++i) CHECK(n1[i] == n2[i]);
}

TEST_CASE("model bundles persist and reload bit-exactly") {
  const auto data = tiny_cohort(8, 2.0, 5);
  const TrainConfig tc = tiny_config(1);
  PipelineResult r = run_pipeline(data, tc);
  const std::string dir = std::filesystem::temp_directory_path() / "bundle_rt";
  std::filesystem::create_directories(dir);
  r.bundle.save(dir);
  ModelBundle back = ModelBundle::load(dir);
  CHECK(params_equal(r.bundle.all_params(), back.all_params()));
  CHECK(back.config.variant == tc.variant);
  CHECK(back.norm.y_mean == r.bundle.norm.y_mean);
  CHECK(back.channels_full == r.bundle.channels_full);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stage metrics record every epoch of every stage") {
  const auto data = tiny_cohort(8, 2.0, 5);
  const TrainConfig tc = tiny_config(2);
  const PipelineResult r = run_pipeline(data, tc);
  int s = 0, w = 0, e = 0, d = 0;
  for (const auto& m : r.metrics) {
    CHECK(std::isfinite(m.loss));
    if (m.stage == "stability") ++s;
    if (m.stage == "weight") ++w;
    if (m.stage == "encoder") ++e;
    if (m.stage == "decoder") ++d;
  }
  CHECK(s == 2);
  CHECK(w == 2);
  CHECK(e == 2);
  CHECK(d == 2);
}
