#pragma once

#include <Eigen/Dense>
#include <vector>

#include "scipnet/neuralcde.hpp"
#include "scipnet/trajectory.hpp"

namespace scipnet {

// Standalone loss kernels. Each returns the loss value and writes the
// gradient w.r.t. its first argument (logits or predictions).
double loss_bce_intensity(const Eigen::VectorXd& logits,
                          const std::vector<int>& events,
                          Eigen::VectorXd* dlogits);
double loss_ce_propensity(const Eigen::MatrixXd& logits,
                          const Eigen::MatrixXd& targets,
                          Eigen::MatrixXd* dlogits);
double loss_mse(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets,
                Eigen::MatrixXd* dpreds);
double loss_weighted_mse(const Eigen::VectorXd& y_hat,
                         const Eigen::VectorXd& y, double weight,
                         Eigen::VectorXd* dy_hat);

// Per-day event/arm probabilities, aligned so row d-1 holds the prediction
// for day d made from the left-limit latent state.
struct DayProbs {
  Eigen::VectorXd event_prob;  // days
  Eigen::MatrixXd arm_prob;    // days x d_a
};

// Intensity/propensity network over a control path: a linear input layer, a
// CDE vector field and two linear output heads. Instantiated twice: the
// stability network (treatment-only channels) and the weight network (full
// history channels).
struct SWNet {
  PathKind kind = PathKind::Full;
  int d_a = 0;
  Linear input;
  CdeField field;
  Linear head_intensity;   // 1 x d_z
  Linear head_propensity;  // d_a x d_z

  void init(PathKind k, int channels, int treat_dims, int d_z, int d_h,
            Rng& rng);
  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  DayProbs forward_probs(const ControlPath& path, int substeps) const;

  // One trajectory's contribution: BCE over all days plus per-arm CE at
  // decision days. Gradients are scaled by `scale` and accumulated.
  double train_pass(const ControlPath& path, const std::vector<int>& a_mask,
                    const Eigen::MatrixXd& a, int substeps, double scale,
                    double dropout, Rng* rng, double* bce_out = nullptr,
                    double* ce_out = nullptr);
};

// History encoder: CDE over the full path with an outcome head conditioned on
// the current treatment.
struct EncoderNet {
  int d_a = 0;
  Linear input;
  CdeField field;
  Linear head;  // d_y x (d_z + d_a)

  void init(int channels, int treat_dims, int d_y, int d_z, int d_h, Rng& rng);
  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  // Latent at the end of a (prefix) path; deterministic.
  Eigen::VectorXd encode(const ControlPath& path) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& z,
                          const Eigen::VectorXd& a) const;

  struct Target {
    int day;                // observation day (>= 1)
    Eigen::VectorXd y;      // normalized outcome
    Eigen::VectorXd a;      // treatment at that day
  };
  double train_pass(const ControlPath& path, const std::vector<Target>& targets,
                    int substeps, double scale, double dropout, Rng* rng);
};

// CAPO decoder: maps the encoder latent into its own latent space, rolls over
// a treatment-side plan path and reads the outcome at the end of the horizon.
struct DecoderNet {
  int d_a = 0;
  Linear input_map;  // d_z x d_zE
  CdeField field;
  Linear head;  // d_y x (d_z + d_a)

  void init(int encoder_latent, int channels, int treat_dims, int d_y, int d_z,
            int d_h, Rng& rng);
  std::vector<ParamRef> params(const std::string& prefix);
  void zero_grad();

  Eigen::VectorXd predict(const Eigen::VectorXd& z_enc,
                          const ControlPath& plan_path,
                          const Eigen::VectorXd& a_end) const;

  // Weighted squared error for one instance; encoder latent is treated as a
  // constant (frozen encoder).
  double train_pass(const Eigen::VectorXd& z_enc, const ControlPath& plan_path,
                    const Eigen::VectorXd& a_end, const Eigen::VectorXd& y,
                    double weight, double scale, double dropout, Rng* rng);
};

}  // namespace scipnet
