#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "scipnet/trajectory.hpp"

namespace scipnet::testing {

// Daily grid trajectory with explicit masks; y defaults to the day index + 1
// where observed, x mirrors the last observed y.
inline Trajectory make_traj(int days, const std::vector<int>& y_mask,
                            const std::vector<int>& a_mask,
                            const Eigen::MatrixXd& a) {
  Trajectory t;
  t.tau = days;
  t.times.resize(days + 1);
  t.y.setConstant(days + 1, 1, std::numeric_limits<double>::quiet_NaN());
  t.y_mask = y_mask;
  t.x.setZero(days + 1, 1);
  t.a = a;
  t.a_mask = a_mask;
  t.statics.setZero(2);
  t.statics(0) = 1.0;
  double last = 0.0;
  for (int d = 0; d <= days; ++d) {
    t.times[d] = d;
    if (y_mask[d]) {
      t.y(d, 0) = d + 1.0;
      last = d + 1.0;
    }
    t.x(d, 0) = last;
  }
  return t;
}

inline Trajectory make_dense_traj(int days, int d_a = 2) {
  std::vector<int> ones(days + 1, 1);
  std::vector<int> amask = ones;
  amask[0] = 0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(days + 1, d_a);
  for (int d = 1; d <= days; ++d) a(d, d % d_a) = 1.0;
  return make_traj(days, ones, amask, a);
}

}  // namespace scipnet::testing
