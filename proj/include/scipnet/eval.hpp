#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scipnet/simulator.hpp"
#include "scipnet/training.hpp"

namespace scipnet {

// One test prefix + intervention with its simulated ground truth.
// `subject` indexes into the test trajectory vector.
struct EvalRecord {
  int subject = 0;
  double cutoff = 0.0;
  InterventionPlan plan;
  double ground_truth = 0.0;  // raw outcome units
};

struct PairPrediction {
  int subject = 0;
  double cutoff = 0.0;
  double y_hat = 0.0;   // raw units
  double y_true = 0.0;  // raw units
};

// Encoder rollout to the cutoff, decoder rollout along the plan path, outcome
// readout. `traj` is in raw units; returns the prediction in raw units.
Eigen::VectorXd predict_capo(const ModelBundle& bundle, const Trajectory& traj,
                             double cutoff, const InterventionPlan& plan);

// RMSE in normalized outcome units (z-scored with the bundle's training
// statistics) over all records. Optionally dumps per-pair predictions.
double evaluate_records(const ModelBundle& bundle,
                        const std::vector<Trajectory>& test_raw,
                        const std::vector<EvalRecord>& records,
                        std::vector<PairPrediction>* pairs = nullptr);

// Record persistence (JSON lines) and per-pair dumps for auditability.
void save_records(const std::vector<EvalRecord>& records,
                  const std::string& path);
std::vector<EvalRecord> load_records(const std::string& path);
void save_pairs(const std::vector<PairPrediction>& pairs,
                const std::string& path);

// Ground-truth evaluation records for a simulated test cohort: one prefix per
// subject at `cutoff`, `plans_per_prefix` random interventions each.
std::vector<EvalRecord> make_eval_records(const SimResult& test,
                                          const SimConfig& sim_cfg,
                                          double cutoff, double horizon,
                                          int plans_per_prefix, Rng& rng);

struct SweepConfig {
  std::vector<double> gammas;
  std::vector<double> horizons;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  int n_train = 500;
  int n_test = 500;
  double omega = 0.0;
  int plans_per_prefix = 50;
  double eval_cutoff = 15.0;
  TrainConfig base;  // epochs, lr, widths; variant/horizon/seed overridden
  SimConfig sim;     // tau, policy scale etc.; gamma/omega/seed overridden
  std::string out_dir;
};

struct SweepRow {
  std::string variant;
  double gamma = 0.0;
  double omega = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  long n_pairs = 0;
  bool failed = false;
};

// Full factorial gamma x seed x horizon x variant run. The S, W and encoder
// stages are shared across horizons and variants within a (gamma, seed) cell;
// only weight caching and the decoder are variant-specific. Failed cells are
// marked and the sweep continues.
std::vector<SweepRow> sweep(const SweepConfig& cfg);

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path);

}  // namespace scipnet
