#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "scipnet/rng.hpp"
#include "scipnet/trajectory.hpp"

namespace scipnet {

// Named view onto a parameter array and its gradient accumulator.
struct ParamRef {
  std::string name;
  Eigen::MatrixXd* value;
  Eigen::MatrixXd* grad;
};

struct Linear {
  Eigen::MatrixXd W, b;    // b is a column vector
  Eigen::MatrixXd dW, db;

  void init(int out, int in, Rng& rng, double scale = 1.0);
  void zero_grad();
  Eigen::VectorXd forward(const Eigen::VectorXd& u) const {
    return W * u + b.col(0);
  }
  // Accumulates parameter grads, returns gradient w.r.t. the input.
  Eigen::VectorXd backward(const Eigen::VectorXd& u,
                           const Eigen::VectorXd& dout);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// Two-layer perceptron vector field (z, t) -> d_z x d_c matrix, tanh hidden
// layer, with an Euler rollout against a control path and exact reverse-mode
// gradients through the unrolled steps.
struct CdeField {
  int d_z = 0, d_c = 0, d_h = 0;
  Linear layer1;  // d_h x (d_z + 1)
  Linear layer2;  // (d_z * d_c) x d_h

  void init(int latent, int channels, int hidden, Rng& rng);
  void zero_grad();
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// Latent trajectory over a rollout window, plus everything needed for the
// backward pass.
struct CDEState {
  std::vector<double> times;
  Eigen::MatrixXd z;  // (steps+1) x d_z
  // caches
  Eigen::MatrixXd hidden;   // steps x d_h (post-tanh, pre-dropout)
  Eigen::MatrixXd dropout;  // steps x d_h multiplicative masks
  int first = 0;            // path grid index of times[0]
};

// z_{k+1} = z_k + f(z_k, t_k) (X_{k+1} - X_k) over path grid indices
// [i0, i1]. Dropout (inverted, rate p) is applied to the hidden layer when an
// rng is supplied. Throws on non-finite latents, naming the step.
CDEState euler_rollout(const CdeField& field, const Eigen::VectorXd& z0,
                       const ControlPath& path, int i0, int i1,
                       double dropout_rate = 0.0, Rng* rng = nullptr);

// Reverse-mode pass: dz holds dL/dz_k injections per state (same rows as
// state.z). Accumulates field parameter grads and returns dL/dz_0.
Eigen::VectorXd rollout_backward(CdeField& field, const CDEState& state,
                                 const ControlPath& path,
                                 const Eigen::MatrixXd& dz);

// Adam with global-norm gradient clipping, beta = (0.9, 0.999), eps = 1e-8.
struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;
};

void adam_update(std::vector<ParamRef>& params, AdamState& state, double lr,
                 double clip_norm);

// Manifest (name, shape, offset as JSON) + raw little-endian 64-bit blob.
// Round-trips bit-exactly.
void save_params(const std::vector<ParamRef>& params,
                 const std::string& base_path);
void load_params(std::vector<ParamRef>& params, const std::string& base_path);

double global_grad_norm(const std::vector<ParamRef>& params);

}  // namespace scipnet
