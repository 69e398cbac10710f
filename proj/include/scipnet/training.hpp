#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scipnet/networks.hpp"
#include "scipnet/trajectory.hpp"
#include "scipnet/weights.hpp"

namespace scipnet {

struct TrainConfig {
  int epochs = 50;
  double lr = 0.001;
  int batch_sw = 64;       // stability / weight / encoder stages
  int batch_decoder = 256;
  double clip_norm = 1.0;
  int d_z = 0;        // latent width; 0 = 2 x input channels
  int d_hidden = 0;   // field hidden width; 0 = 2 x d_z
  double dropout = 0.1;
  std::string variant = "scip";  // scip | cip | unweighted
  double horizon = 1.0;          // days
  double grid_step = 1.0;        // path grid step (days)
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

// Z-score statistics for outcome and covariate channels, estimated on the
// training set and applied everywhere (paths, targets, RMSE).
struct Normalization {
  Eigen::VectorXd y_mean, y_std;
  Eigen::VectorXd x_mean, x_std;
};

Normalization compute_normalization(const std::vector<Trajectory>& trajs);
std::vector<Trajectory> normalize_dataset(const std::vector<Trajectory>& trajs,
                                          const Normalization& norm);

struct StageMetric {
  int epoch = 0;
  std::string stage;
  double loss = 0.0;
};

void write_metrics_csv(const std::string& path,
                       const std::vector<StageMetric>& metrics);

// Per-instance decoder weights plus caching diagnostics.
struct WeightCache {
  std::vector<double> weights;  // post truncation + mean-1 normalization
  std::vector<double> raw;      // pre-normalization products
  int n_factors = 0;
  int n_floored = 0;   // factors where a floor engaged
  int n_skipped = 0;   // instances dropped for non-finite weights
  bool floor_warning = false;  // floor-flag rate above 20%
};

// Everything a trained run needs at inference time.
struct ModelBundle {
  TrainConfig config;
  Normalization norm;
  int d_y = 0, d_x = 0, d_a = 0, d_static = 0;
  int channels_full = 0, channels_treat = 0;
  int substeps = 1;
  SWNet s, w;
  EncoderNet enc;
  DecoderNet dec;

  std::vector<ParamRef> all_params();
  void save(const std::string& dir);
  static ModelBundle load(const std::string& dir);
};

// Stage trainers. `paths` align with `data`; `train_idx` / `val_idx` index
// into both. Metrics rows are appended per epoch.
void train_sw(SWNet& net, const std::vector<Trajectory>& data,
              const std::vector<ControlPath>& paths,
              const std::vector<int>& train_idx,
              const std::vector<int>& val_idx, const TrainConfig& cfg,
              Rng& rng, std::vector<StageMetric>& metrics,
              const std::string& stage);

void train_encoder(EncoderNet& net, const std::vector<Trajectory>& data,
                   const std::vector<ControlPath>& paths,
                   const std::vector<int>& train_idx,
                   const std::vector<int>& val_idx, const TrainConfig& cfg,
                   Rng& rng, std::vector<StageMetric>& metrics);

// Stabilized (or variant-specific) weights for each training instance.
// Intensities come from per-day event probabilities at rate p / grid_step,
// floored; propensities factorize per arm, floored. Weights for scip/cip are
// truncated to the [1, 99] percentiles and rescaled to mean 1.
WeightCache cache_weights(const std::vector<const Trajectory*>& traj_of,
                          const std::vector<Instance>& instances,
                          const SWNet& s, const SWNet& w,
                          const std::string& variant, const TrainConfig& cfg);

// Precomputed decoder inputs for one instance (frozen encoder).
struct DecoderInstance {
  Eigen::VectorXd z_enc;
  ControlPath plan_path;
  Eigen::VectorXd a_end;
  Eigen::VectorXd y_target;
};

DecoderInstance make_decoder_instance(const EncoderNet& enc,
                                      const Instance& inst,
                                      const TrainConfig& cfg);

void train_decoder(DecoderNet& net, const std::vector<DecoderInstance>& insts,
                   const std::vector<double>& weights,
                   const std::vector<int>& train_idx,
                   const std::vector<int>& val_idx, const TrainConfig& cfg,
                   Rng& rng, std::vector<StageMetric>& metrics);

// Normalization statistics, dimensions and freshly initialized networks for a
// dataset; no training.
ModelBundle make_bundle(const std::vector<Trajectory>& raw,
                        const TrainConfig& cfg);

struct PipelineResult {
  ModelBundle bundle;
  std::vector<StageMetric> metrics;
  WeightCache cache;
};

// Full staged run on an already-loaded dataset: normalization, S and W fits,
// weight caching, encoder fit, decoder fit.
PipelineResult run_pipeline(const std::vector<Trajectory>& raw,
                            const TrainConfig& cfg);

}  // namespace scipnet
