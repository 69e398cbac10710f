#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace scipnet {

// One subject's irregular multivariate time series on a base grid.
// Rows of y/x/a align with `times`. Unobserved outcome entries are NaN and
// must never be read (y_mask == 0 marks them).
struct Trajectory {
  long id = 0;
  double tau = 30.0;
  std::vector<double> times;
  Eigen::MatrixXd y;        // n x d_y, NaN where y_mask == 0
  std::vector<int> y_mask;  // increments of the outcome observation process
  Eigen::MatrixXd x;        // n x d_x
  Eigen::MatrixXd a;        // n x d_a in {0,1}, zero rows where a_mask == 0
  std::vector<int> a_mask;  // increments of the treatment decision process
  Eigen::VectorXd statics;

  int n() const { return static_cast<int>(times.size()); }
  int dy() const { return static_cast<int>(y.cols()); }
  int dx() const { return static_cast<int>(x.cols()); }
  int da() const { return static_cast<int>(a.cols()); }
};

// Hard intervention: step-wise constant treatments with explicit decision
// times in (start, horizon].
struct InterventionPlan {
  double start = 0.0;
  std::vector<double> jump_times;
  Eigen::MatrixXd values;  // J x d_a in {0,1}
  double horizon = 30.0;

  int jumps() const { return static_cast<int>(jump_times.size()); }
};

// Left-limit view of a trajectory: events with timestamp < cutoff.
struct HistoryPrefix {
  const Trajectory* traj = nullptr;
  double cutoff = 0.0;
};

enum class PathKind { Full, TreatmentOnly };

// Piecewise-linear interpolated multichannel path on a uniform grid,
// driving the CDE rollouts. Counting channels are normalized by tau.
struct ControlPath {
  std::vector<double> grid;
  Eigen::MatrixXd channels;  // grid.size() x d_c
  PathKind kind = PathKind::Full;
  double tau = 30.0;

  // channel layout
  int off_y = -1, off_x = -1, off_a = 0, off_time = 0, off_nx = -1, off_na = 0,
      off_static = -1;
  int dy = 0, dx = 0, da = 0, dstatic = 0;

  int points() const { return static_cast<int>(grid.size()); }
  int dc() const { return static_cast<int>(channels.cols()); }
};

std::vector<std::string> validate(const Trajectory& traj);

// Linear interpolation between observed points, constant extrapolation at the
// ends, treatments held between decision times, counting channels stepping at
// event times (divided by tau). Only events with time < cutoff enter; the grid
// spans [0, cutoff] with step h. Throws std::invalid_argument on an empty
// required channel.
ControlPath build_control_path(const Trajectory& traj, double cutoff, double h,
                               PathKind kind = PathKind::Full);

// Path over [plan.start, plan.start + horizon] carrying only treatment-side
// channels: plan treatments held between jumps, a time channel and the
// continued decision-counting channel. `a_prev` / `na_prev` give the state at
// the cutoff (left limit).
ControlPath build_plan_path(const InterventionPlan& plan, double horizon,
                            double tau, double h, const Eigen::VectorXd& a_prev,
                            double na_prev);

// One training/evaluation instance carved from a trajectory.
struct Instance {
  HistoryPrefix prefix;
  InterventionPlan factual;  // factual decisions in (t, t+delta]
  Eigen::VectorXd y_target;  // observed outcome at t+delta
  double horizon = 1.0;
};

// One instance per grid time t > 0 with an observed outcome at t+delta.
std::vector<Instance> slice_instances(const Trajectory& traj,
                                      const std::vector<double>& horizons);

// JSON-lines serialization (one trajectory per line; missing outcomes null).
std::string trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const std::string& line);
void save_trajectories(const std::vector<Trajectory>& trajs,
                       const std::string& path);
std::vector<Trajectory> load_trajectories(const std::string& path);

}  // namespace scipnet
