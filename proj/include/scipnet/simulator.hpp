#pragma once

#include <vector>

#include "scipnet/rng.hpp"
#include "scipnet/trajectory.hpp"

namespace scipnet {

enum class Subgroup { None, A, B };

// Per-patient tumor dynamics parameters.
struct PatientParams {
  double rho = 0.0;      // growth rate
  double carrying = 30.0;
  double alpha_r = 0.0;  // radio kill, linear term
  double beta_r = 0.0;   // fixed to 10 * alpha_r
  double alpha_c = 0.0;  // chemo kill
  Subgroup subgroup = Subgroup::None;
};

struct SimConfig {
  int n_subjects = 1000;
  double tau = 30.0;
  double gamma = 0.0;       // confounding strength
  double omega = 0.0;       // observation informativeness (0 = at random)
  double d_max = 13.0;      // cm, also the reference diameter
  double window = 15.0;     // days in the diameter averages
  double chemo_dose = 5.0;  // concentration applied when the chemo arm fires
  double radio_dose = 2.0;  // Gy applied when the radio arm fires
  double noise_std = 0.01;
  double decision_rate = 1.0;  // treatment decision points per day
  double y0_min = 0.5;         // initial volume range (cm^3)
  double y0_max = 2.0;
  std::uint64_t seed = 0;
};

PatientParams sample_params(Rng& rng);

// One-day multiplicative update of the tumor volume. `chemo` and `radio` are
// the applied dose magnitudes (zero when the arm does not fire). The result is
// clamped to [0.01 cm^3, volume of a d_max-diameter sphere].
double step_tumor(double volume, double chemo, double radio,
                  const PatientParams& params, double eps,
                  double d_max = 13.0);

double volume_to_diameter(double volume);
double diameter_to_volume(double diameter);

// Probability that a treatment arm fires, from the windowed mean diameter of
// the recent volume history.
double treatment_policy(const std::vector<double>& volumes, double gamma,
                        double d_max, double window);

// Outcome observation rate per day (Hawkes-style sigmoid intensity).
double observation_intensity(const std::vector<double>& volumes, double omega,
                             double d_ref, double window);

struct SimResult {
  std::vector<Trajectory> trajectories;
  std::vector<PatientParams> params;
  std::vector<std::vector<double>> true_volumes;  // per subject, per day
};

SimResult simulate(const SimConfig& config);

// Noise-free rollout from the last factual volume at the prefix cutoff,
// applying exactly the plan's treatments at its jump times and none elsewhere.
double ground_truth_capo(const std::vector<double>& true_volumes,
                         const HistoryPrefix& prefix,
                         const InterventionPlan& plan,
                         const PatientParams& params, const SimConfig& config);

// Uniform i.i.d. binary treatment vectors at each day in (start, start+horizon].
std::vector<InterventionPlan> sample_test_interventions(double start,
                                                        double horizon,
                                                        double tau, int d_a,
                                                        int count, Rng& rng);

}  // namespace scipnet
