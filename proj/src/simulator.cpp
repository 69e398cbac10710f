#include "scipnet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scipnet {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMinVolume = 0.01;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Mean diameter over the trailing `window` days (shorter histories average
// what is available).
double windowed_mean_diameter(const std::vector<double>& volumes,
                              double window) {
  const std::size_t w = static_cast<std::size_t>(window);
  const std::size_t n = volumes.size();
  const std::size_t start = n > w ? n - w : 0;
  double sum = 0.0;
  for (std::size_t i = start; i < n; ++i) sum += volume_to_diameter(volumes[i]);
  return sum / static_cast<double>(n - start);
}

}  // namespace

double volume_to_diameter(double volume) {
  return std::cbrt(6.0 * volume / kPi);
}

double diameter_to_volume(double diameter) {
  return kPi * diameter * diameter * diameter / 6.0;
}

PatientParams sample_params(Rng& rng) {
  PatientParams p;
  const int group = static_cast<int>(rng.below(3));
  p.subgroup = group == 0 ? Subgroup::None : (group == 1 ? Subgroup::A : Subgroup::B);
  double mean_alpha_r = 0.0398;
  double mean_alpha_c = 0.028;
  if (p.subgroup == Subgroup::A) mean_alpha_r *= 1.1;
  if (p.subgroup == Subgroup::B) mean_alpha_c *= 1.1;
  p.rho = rng.normal(7.00e-5, std::sqrt(7.23e-3));
  p.alpha_r = rng.normal(mean_alpha_r, std::sqrt(0.168));
  p.alpha_c = rng.normal(mean_alpha_c, std::sqrt(7.00e-4));
  p.beta_r = 10.0 * p.alpha_r;
  p.carrying = 30.0;
  return p;
}

double step_tumor(double volume, double chemo, double radio,
                  const PatientParams& params, double eps, double d_max) {
  if (!(volume > 0.0)) throw std::invalid_argument("nonpositive volume");
  const double growth = params.rho * std::log(params.carrying / volume);
  const double chemo_kill = params.alpha_c * chemo;
  const double radio_kill = params.alpha_r * radio + params.beta_r * radio * radio;
  double next = volume * (1.0 + growth - chemo_kill - radio_kill + eps);
  const double vmax = diameter_to_volume(d_max);
  return std::clamp(next, kMinVolume, vmax);
}

double treatment_policy(const std::vector<double>& volumes, double gamma,
                        double d_max, double window) {
  if (volumes.empty()) throw std::invalid_argument("empty history");
  const double dbar = windowed_mean_diameter(volumes, window);
  return sigmoid(gamma / d_max * (dbar - d_max / 2.0));
}

double observation_intensity(const std::vector<double>& volumes, double omega,
                             double d_ref, double window) {
  const double dbar =
      volumes.empty() ? 0.0 : windowed_mean_diameter(volumes, window);
  return sigmoid(omega * (dbar / d_ref - 0.5));
}

SimResult simulate(const SimConfig& config) {
  if (config.gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
  if (config.tau < config.window)
    throw std::invalid_argument("tau must cover the policy window");
  SimResult result;
  const Rng master(config.seed);
  const int days = static_cast<int>(std::llround(config.tau));
  const int n_rows = days + 1;

  for (int subject = 0; subject < config.n_subjects; ++subject) {
    Rng rng = master.split(static_cast<std::uint64_t>(subject));
    PatientParams params = sample_params(rng);

    Trajectory traj;
    traj.id = subject;
    traj.tau = config.tau;
    traj.times.resize(n_rows);
    traj.y.setConstant(n_rows, 1, std::numeric_limits<double>::quiet_NaN());
    traj.y_mask.assign(n_rows, 0);
    traj.x.setZero(n_rows, 1);
    traj.a.setZero(n_rows, 2);
    traj.a_mask.assign(n_rows, 0);
    traj.statics.setZero(3);
    traj.statics(static_cast<int>(params.subgroup)) = 1.0;

    std::vector<double> volumes;
    volumes.reserve(n_rows);
    double v = rng.uniform(config.y0_min, config.y0_max);
    volumes.push_back(v);

    // baseline: always observed, no treatment decision
    traj.times[0] = 0.0;
    traj.y(0, 0) = v;
    traj.y_mask[0] = 1;
    traj.x(0, 0) = v;
    double last_observed = v;

    for (int day = 1; day <= days; ++day) {
      traj.times[day] = static_cast<double>(day);
      double chemo = 0.0, radio = 0.0;
      const bool decision = rng.bernoulli(std::min(1.0, config.decision_rate));
      if (decision) {
        const double p = treatment_policy(volumes, config.gamma, config.d_max,
                                          config.window);
        traj.a_mask[day] = 1;
        if (rng.bernoulli(p)) {
          traj.a(day, 0) = 1.0;
          chemo = config.chemo_dose;
        }
        if (rng.bernoulli(p)) {
          traj.a(day, 1) = 1.0;
          radio = config.radio_dose;
        }
      }
      const double eps = rng.normal(0.0, config.noise_std);
      v = step_tumor(v, chemo, radio, params, eps, config.d_max);
      volumes.push_back(v);

      traj.x(day, 0) = last_observed;
      const double rate = observation_intensity(volumes, config.omega,
                                                config.d_max, config.window);
      if (rng.bernoulli(rate)) {
        traj.y_mask[day] = 1;
        traj.y(day, 0) = v;
        last_observed = v;
      }
    }

    result.trajectories.push_back(std::move(traj));
    result.params.push_back(params);
    result.true_volumes.push_back(std::move(volumes));
  }
  return result;
}

double ground_truth_capo(const std::vector<double>& true_volumes,
                         const HistoryPrefix& prefix,
                         const InterventionPlan& plan,
                         const PatientParams& params, const SimConfig& config) {
  if (plan.start < prefix.cutoff - 1e-9)
    throw std::invalid_argument("plan starts before the prefix cutoff");
  const int start_day = static_cast<int>(std::llround(plan.start));
  const int end_day = static_cast<int>(std::llround(plan.horizon));
  double v = true_volumes.at(static_cast<std::size_t>(start_day));
  for (int day = start_day + 1; day <= end_day; ++day) {
    double chemo = 0.0, radio = 0.0;
    for (int j = 0; j < plan.jumps(); ++j) {
      if (std::llround(plan.jump_times[j]) == day) {
        if (plan.values(j, 0) > 0.5) chemo = config.chemo_dose;
        if (plan.values(j, 1) > 0.5) radio = config.radio_dose;
      }
    }
    v = step_tumor(v, chemo, radio, params, 0.0, config.d_max);
  }
  return v;
}

std::vector<InterventionPlan> sample_test_interventions(double start,
                                                        double horizon,
                                                        double tau, int d_a,
                                                        int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  // daily jumps must stay inside (start, start + horizon]
  const int days = static_cast<int>(std::floor(horizon + 1e-9));
  if (days < 1) throw std::invalid_argument("horizon must cover at least one day");
  std::vector<InterventionPlan> plans;
  plans.reserve(count);
  for (int k = 0; k < count; ++k) {
    InterventionPlan plan;
    plan.start = start;
    plan.horizon = start + horizon;
    plan.jump_times.resize(days);
    plan.values.setZero(days, d_a);
    for (int j = 0; j < days; ++j) {
      plan.jump_times[j] = start + j + 1;
      for (int c = 0; c < d_a; ++c)
        plan.values(j, c) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace scipnet
