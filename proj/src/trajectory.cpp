#include "scipnet/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace scipnet {

namespace {

constexpr double kTimeEps = 1e-9;

// Piecewise-linear interpolation with constant extrapolation at the ends.
double interp(const std::vector<double>& ts, const std::vector<double>& vs,
              double q) {
  if (q <= ts.front()) return vs.front();
  if (q >= ts.back()) return vs.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), q);
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  const double w = (q - ts[lo]) / (ts[hi] - ts[lo]);
  return vs[lo] + w * (vs[hi] - vs[lo]);
}

}  // namespace

std::vector<std::string> validate(const Trajectory& traj) {
  std::vector<std::string> errors;
  const std::size_t n = traj.times.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (!(traj.times[i] > traj.times[i - 1])) {
      errors.push_back("times not strictly increasing");
      break;
    }
  }
  const bool lengths_ok =
      static_cast<std::size_t>(traj.y.rows()) == n &&
      traj.y_mask.size() == n &&
      static_cast<std::size_t>(traj.x.rows()) == n &&
      static_cast<std::size_t>(traj.a.rows()) == n && traj.a_mask.size() == n;
  if (!lengths_ok) errors.push_back("array length mismatch");
  if (lengths_ok) {
    for (std::size_t i = 0; i < n; ++i) {
      if (traj.a_mask[i] == 0 && traj.a.row(i).cwiseAbs().sum() > 0.0) {
        errors.push_back("treatment outside decision time");
        break;
      }
    }
  }
  return errors;
}

ControlPath build_control_path(const Trajectory& traj, double cutoff, double h,
                               PathKind kind) {
  if (h <= 0.0) throw std::invalid_argument("step must be positive");
  if (cutoff > traj.tau + kTimeEps)
    throw std::invalid_argument("cutoff beyond tau");

  ControlPath path;
  path.kind = kind;
  path.tau = traj.tau;
  const int steps = static_cast<int>(std::floor(cutoff / h + kTimeEps));
  path.grid.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) path.grid[i] = i * h;

  path.da = traj.da();
  int dc = 0;
  if (kind == PathKind::Full) {
    path.dy = traj.dy();
    path.dx = traj.dx();
    path.dstatic = static_cast<int>(traj.statics.size());
    path.off_y = 0;
    path.off_x = path.off_y + path.dy;
    path.off_a = path.off_x + path.dx;
    path.off_time = path.off_a + path.da;
    path.off_nx = path.off_time + 1;
    path.off_na = path.off_nx + 1;
    path.off_static = path.off_na + 1;
    dc = path.off_static + path.dstatic;
  } else {
    path.off_a = 0;
    path.off_time = path.da;
    path.off_na = path.da + 1;
    dc = path.da + 2;
  }
  path.channels.setZero(steps + 1, dc);

  // Observation events (shared outcome/covariate counting process) before the
  // cutoff, in time order.
  std::vector<double> obs_t;
  std::vector<std::size_t> obs_idx;
  std::vector<double> dec_t;
  std::vector<std::size_t> dec_idx;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.times[i] >= cutoff - kTimeEps) break;
    if (traj.y_mask[i]) {
      obs_t.push_back(traj.times[i]);
      obs_idx.push_back(i);
    }
    if (traj.a_mask[i]) {
      dec_t.push_back(traj.times[i]);
      dec_idx.push_back(i);
    }
  }

  if (kind == PathKind::Full && obs_t.empty())
    throw std::invalid_argument("empty channel");

  for (int g = 0; g <= steps; ++g) {
    const double t = path.grid[g];
    // time channel
    path.channels(g, path.off_time) = t / traj.tau;
    // treatments: held at last decision before or at t, zero before the first
    auto dit = std::upper_bound(dec_t.begin(), dec_t.end(), t + kTimeEps);
    if (dit != dec_t.begin()) {
      const std::size_t row = dec_idx[static_cast<std::size_t>(dit - dec_t.begin()) - 1];
      path.channels.block(g, path.off_a, 1, path.da) = traj.a.row(row);
    }
    // decision-counting channel
    path.channels(g, path.off_na) =
        static_cast<double>(dit - dec_t.begin()) / traj.tau;

    if (kind == PathKind::Full) {
      for (int c = 0; c < path.dy; ++c) {
        std::vector<double> vals(obs_t.size());
        for (std::size_t j = 0; j < obs_idx.size(); ++j)
          vals[j] = traj.y(obs_idx[j], c);
        path.channels(g, path.off_y + c) = interp(obs_t, vals, t);
      }
      for (int c = 0; c < path.dx; ++c) {
        std::vector<double> vals(obs_t.size());
        for (std::size_t j = 0; j < obs_idx.size(); ++j)
          vals[j] = traj.x(obs_idx[j], c);
        path.channels(g, path.off_x + c) = interp(obs_t, vals, t);
      }
      auto oit = std::upper_bound(obs_t.begin(), obs_t.end(), t + kTimeEps);
      path.channels(g, path.off_nx) =
          static_cast<double>(oit - obs_t.begin()) / traj.tau;
      for (int c = 0; c < path.dstatic; ++c)
        path.channels(g, path.off_static + c) = traj.statics(c);
    }
  }
  return path;
}

ControlPath build_plan_path(const InterventionPlan& plan, double horizon,
                            double tau, double h, const Eigen::VectorXd& a_prev,
                            double na_prev) {
  ControlPath path;
  path.kind = PathKind::TreatmentOnly;
  path.tau = tau;
  path.da = static_cast<int>(a_prev.size());
  path.off_a = 0;
  path.off_time = path.da;
  path.off_na = path.da + 1;
  const int steps = static_cast<int>(std::llround(horizon / h));
  path.grid.resize(steps + 1);
  path.channels.setZero(steps + 1, path.da + 2);
  for (int g = 0; g <= steps; ++g) {
    const double t = plan.start + g * h;
    path.grid[g] = t;
    path.channels(g, path.off_time) = t / tau;
    Eigen::VectorXd a = a_prev;
    int count = 0;
    for (int j = 0; j < plan.jumps(); ++j) {
      if (plan.jump_times[j] <= t + kTimeEps) {
        a = plan.values.row(j);
        ++count;
      }
    }
    path.channels.block(g, path.off_a, 1, path.da) = a.transpose();
    path.channels(g, path.off_na) = na_prev + count / tau;
  }
  return path;
}

std::vector<Instance> slice_instances(const Trajectory& traj,
                                      const std::vector<double>& horizons) {
  std::vector<Instance> out;
  const int n = traj.n();
  for (double delta : horizons) {
    if (delta <= 0.0) throw std::invalid_argument("horizon must be positive");
    for (int i = 0; i < n; ++i) {
      const double t = traj.times[i];
      if (t <= kTimeEps) continue;  // empty prefix
      const double target_t = t + delta;
      // locate the target timestamp on the base grid
      int ti = -1;
      for (int j = i + 1; j < n; ++j) {
        if (std::abs(traj.times[j] - target_t) < kTimeEps) {
          ti = j;
          break;
        }
        if (traj.times[j] > target_t + kTimeEps) break;
      }
      if (ti < 0 || !traj.y_mask[ti]) continue;

      Instance inst;
      inst.prefix = HistoryPrefix{&traj, t};
      inst.horizon = delta;
      inst.y_target = traj.y.row(ti);
      inst.factual.start = t;
      inst.factual.horizon = target_t;
      std::vector<double> jt;
      std::vector<int> rows;
      for (int j = 0; j < n; ++j) {
        if (traj.times[j] > t + kTimeEps &&
            traj.times[j] <= target_t + kTimeEps && traj.a_mask[j]) {
          jt.push_back(traj.times[j]);
          rows.push_back(j);
        }
      }
      inst.factual.jump_times = jt;
      inst.factual.values.resize(static_cast<int>(rows.size()), traj.da());
      for (std::size_t r = 0; r < rows.size(); ++r)
        inst.factual.values.row(static_cast<int>(r)) = traj.a.row(rows[r]);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

std::string trajectory_to_json(const Trajectory& traj) {
  nlohmann::json j;
  j["id"] = traj.id;
  j["tau"] = traj.tau;
  j["times"] = traj.times;
  nlohmann::json y = nlohmann::json::array();
  for (int i = 0; i < traj.y.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < traj.y.cols(); ++c) {
      if (traj.y_mask[i])
        row.push_back(traj.y(i, c));
      else
        row.push_back(nullptr);
    }
    y.push_back(row);
  }
  j["y"] = y;
  j["y_mask"] = traj.y_mask;
  nlohmann::json x = nlohmann::json::array();
  for (int i = 0; i < traj.x.rows(); ++i) {
    std::vector<double> row(traj.x.cols());
    for (int c = 0; c < traj.x.cols(); ++c) row[c] = traj.x(i, c);
    x.push_back(row);
  }
  j["x"] = x;
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < traj.a.rows(); ++i) {
    std::vector<double> row(traj.a.cols());
    for (int c = 0; c < traj.a.cols(); ++c) row[c] = traj.a(i, c);
    a.push_back(row);
  }
  j["a"] = a;
  j["a_mask"] = traj.a_mask;
  std::vector<double> st(traj.statics.size());
  for (int c = 0; c < traj.statics.size(); ++c) st[c] = traj.statics(c);
  j["static"] = st;
  return j.dump();
}

Trajectory trajectory_from_json(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  Trajectory traj;
  traj.id = j.at("id").get<long>();
  traj.tau = j.at("tau").get<double>();
  traj.times = j.at("times").get<std::vector<double>>();
  traj.y_mask = j.at("y_mask").get<std::vector<int>>();
  traj.a_mask = j.at("a_mask").get<std::vector<int>>();
  const auto& y = j.at("y");
  const int n = static_cast<int>(traj.times.size());
  const int dy = n > 0 ? static_cast<int>(y.at(0).size()) : 0;
  traj.y.setConstant(n, dy, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < dy; ++c)
      if (!y.at(i).at(c).is_null()) traj.y(i, c) = y.at(i).at(c).get<double>();
  const auto& x = j.at("x");
  const int dx = n > 0 ? static_cast<int>(x.at(0).size()) : 0;
  traj.x.resize(n, dx);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < dx; ++c) traj.x(i, c) = x.at(i).at(c).get<double>();
  const auto& a = j.at("a");
  const int da = n > 0 ? static_cast<int>(a.at(0).size()) : 0;
  traj.a.resize(n, da);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < da; ++c) traj.a(i, c) = a.at(i).at(c).get<double>();
  const auto st = j.at("static").get<std::vector<double>>();
  traj.statics.resize(static_cast<int>(st.size()));
  for (std::size_t c = 0; c < st.size(); ++c)
    traj.statics(static_cast<int>(c)) = st[c];
  return traj;
}

void save_trajectories(const std::vector<Trajectory>& trajs,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const auto& t : trajs) out << trajectory_to_json(t) << "\n";
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(trajectory_from_json(line));
  }
  return out;
}

}  // namespace scipnet
