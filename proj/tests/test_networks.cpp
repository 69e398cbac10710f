#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "scipnet/networks.hpp"

using namespace scipnet;
using scipnet::testing::make_dense_traj;

namespace {

SWNet make_swnet(PathKind kind, int channels, Rng& rng) {
  SWNet net;
  net.init(kind, channels, 2, 4, 6, rng);
  return net;
}

ControlPath plan_path_for_test() {
  InterventionPlan plan;
  plan.start = 5.0;
  plan.jump_times = {6.0, 7.0};
  plan.values.resize(2, 2);
  plan.values << 1, 0, 1, 1;
  plan.horizon = 7.0;
  return build_plan_path(plan, 2.0, 30.0, 1.0, Eigen::VectorXd::Zero(2), 0.1);
}

}  // namespace

TEST_CASE("losses vanish on perfect predictions and stay non-negative") {
  Eigen::VectorXd logits(2);
  logits << 40.0, -40.0;
  CHECK(loss_bce_intensity(logits, {1, 0}, nullptr) ==
        doctest::Approx(0.0).epsilon(1e-12));

  Eigen::MatrixXd pl(1, 2);
  pl << 40.0, -40.0;
  Eigen::MatrixXd pt(1, 2);
  pt << 1.0, 0.0;
  CHECK(loss_ce_propensity(pl, pt, nullptr) ==
        doctest::Approx(0.0).epsilon(1e-12));

  Eigen::MatrixXd y(3, 1);
  y << 1, 2, 3;
  CHECK(loss_mse(y, y, nullptr) == 0.0);

  Eigen::VectorXd yh(1), yt(1);
  yh << 2.0;
  yt << 2.0;
  CHECK(loss_weighted_mse(yh, yt, 5.0, nullptr) == 0.0);

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd l(3);
    for (int i = 0; i < 3; ++i) l(i) = rng.normal(0, 3);
    CHECK(loss_bce_intensity(l, {1, 0, 1}, nullptr) >= 0.0);
  }
}

TEST_CASE("decoder loss is linear in the weight") {
  Eigen::VectorXd yh(1), yt(1);
  yh << 2.5;
  yt << 1.0;
  const double base = loss_weighted_mse(yh, yt, 1.0, nullptr);
  CHECK(base == doctest::Approx(2.25).epsilon(1e-14));
  CHECK(loss_weighted_mse(yh, yt, 2.0, nullptr) == 2.0 * base);
}

TEST_CASE("loss gradients match the sigmoid residual form") {
  Eigen::VectorXd logits(2);
  logits << 0.0, 1.0;
  Eigen::VectorXd dl;
  loss_bce_intensity(logits, {1, 0}, &dl);
  CHECK(dl(0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(dl(1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("untrained networks emit finite probabilities inside (0,1)") {
  Rng rng(2);
  const Trajectory traj = make_dense_traj(10);
  const ControlPath path =
      build_control_path(traj, 10.0, 1.0, PathKind::TreatmentOnly);
  SWNet net = make_swnet(PathKind::TreatmentOnly, path.dc(), rng);
  const DayProbs probs = net.forward_probs(path, 1);
  REQUIRE(probs.event_prob.size() == 10);
  for (int d = 0; d < 10; ++d) {
    CHECK(probs.event_prob(d) > 0.0);
    CHECK(probs.event_prob(d) < 1.0);
    for (int j = 0; j < 2; ++j) {
      CHECK(probs.arm_prob(d, j) > 0.0);
      CHECK(probs.arm_prob(d, j) < 1.0);
    }
  }
}

TEST_CASE("stability network ignores outcome and covariate mutations") {
  Rng rng(2);
  Trajectory traj = make_dense_traj(10);
  const ControlPath before =
      build_control_path(traj, 10.0, 1.0, PathKind::TreatmentOnly);
  SWNet net = make_swnet(PathKind::TreatmentOnly, before.dc(), rng);
  const DayProbs p0 = net.forward_probs(before, 1);
  traj.y.array() += 5.0;
  traj.x.array() -= 2.0;
  const ControlPath after =
      build_control_path(traj, 10.0, 1.0, PathKind::TreatmentOnly);
  const DayProbs p1 = net.forward_probs(after, 1);
  CHECK(p0.event_prob == p1.event_prob);
  CHECK(p0.arm_prob == p1.arm_prob);
}

TEST_CASE("encoder latent at the cutoff is deterministic") {
  Rng rng(5);
  const Trajectory traj = make_dense_traj(10);
  const ControlPath path = build_control_path(traj, 7.0, 1.0, PathKind::Full);
  EncoderNet enc;
  enc.init(path.dc(), 2, 1, 4, 6, rng);
  const Eigen::VectorXd z1 = enc.encode(path);
  const Eigen::VectorXd z2 = enc.encode(path);
  CHECK(z1 == z2);
  CHECK(z1.allFinite());
}

TEST_CASE("encoder training with no targets contributes nothing") {
  Rng rng(5);
  const Trajectory traj = make_dense_traj(6);
  const ControlPath path = build_control_path(traj, 6.0, 1.0, PathKind::Full);
  EncoderNet enc;
  enc.init(path.dc(), 2, 1, 4, 6, rng);
  enc.zero_grad();
  const double loss = enc.train_pass(path, {}, 1, 1.0, 0.0, nullptr);
  CHECK(loss == 0.0);
  for (const auto& p : enc.params("e")) CHECK(p.grad->norm() == 0.0);
}

TEST_CASE("decoder sees only the plan path, not later treatments") {
  Rng rng(6);
  const ControlPath path = plan_path_for_test();
  DecoderNet dec;
  dec.init(4, path.dc(), 2, 1, 4, 6, rng);
  Eigen::VectorXd z(4);
  z << 0.1, -0.2, 0.3, 0.05;
  Eigen::VectorXd a_end(2);
  a_end << 1, 1;
  const Eigen::VectorXd y1 = dec.predict(z, path, a_end);

  // identical plan with an extra jump beyond the horizon
  InterventionPlan plan;
  plan.start = 5.0;
  plan.jump_times = {6.0, 7.0, 9.0};
  plan.values.resize(3, 2);
  plan.values << 1, 0, 1, 1, 0, 0;
  plan.horizon = 9.0;
  const ControlPath longer =
      build_plan_path(plan, 2.0, 30.0, 1.0, Eigen::VectorXd::Zero(2), 0.1);
  const Eigen::VectorXd y2 = dec.predict(z, longer, a_end);
  CHECK(y1 == y2);
}

TEST_CASE("decoder gradient scales exactly with the instance weight") {
  Rng rng(7);
  const ControlPath path = plan_path_for_test();
  DecoderNet a, b;
  a.init(4, path.dc(), 2, 1, 4, 6, rng);
  Rng rng2(7);
  b.init(4, path.dc(), 2, 1, 4, 6, rng2);

  Eigen::VectorXd z(4);
  z << 0.1, -0.2, 0.3, 0.05;
  Eigen::VectorXd a_end(2);
  a_end << 1, 1;
  Eigen::VectorXd y(1);
  y << 0.7;

  a.zero_grad();
  const double l1 = a.train_pass(z, path, a_end, y, 1.0, 1.0, 0.0, nullptr);
  b.zero_grad();
  const double l3 = b.train_pass(z, path, a_end, y, 3.0, 1.0, 0.0, nullptr);
  CHECK(l3 == doctest::Approx(3.0 * l1).epsilon(1e-14));
  auto pa = a.params("d");
  auto pb = b.params("d");
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const Eigen::MatrixXd diff = *pb[i].grad - 3.0 * *pa[i].grad;
    CHECK(diff.lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("sw training pass rejects short decision masks") {
  Rng rng(2);
  const Trajectory traj = make_dense_traj(10);
  const ControlPath path =
      build_control_path(traj, 10.0, 1.0, PathKind::TreatmentOnly);
  SWNet net = make_swnet(PathKind::TreatmentOnly, path.dc(), rng);
  CHECK_THROWS_AS(
      net.train_pass(path, {0, 1}, traj.a, 1, 1.0, 0.0, nullptr),
      std::invalid_argument);
}
