#include "scipnet/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace scipnet {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable BCE on a logit: softplus(l) - y*l.
double bce_logit(double logit, double target) {
  const double sp =
      logit > 0.0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return sp - target * logit;
}

}  // namespace

double loss_bce_intensity(const Eigen::VectorXd& logits,
                          const std::vector<int>& events,
                          Eigen::VectorXd* dlogits) {
  if (static_cast<std::size_t>(logits.size()) != events.size())
    throw std::invalid_argument("logits/events length mismatch");
  double loss = 0.0;
  if (dlogits != nullptr) dlogits->setZero(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double y = events[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    loss += bce_logit(logits(i), y);
    if (dlogits != nullptr) (*dlogits)(i) = sigmoid(logits(i)) - y;
  }
  return loss;
}

double loss_ce_propensity(const Eigen::MatrixXd& logits,
                          const Eigen::MatrixXd& targets,
                          Eigen::MatrixXd* dlogits) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw std::invalid_argument("logits/targets shape mismatch");
  double loss = 0.0;
  if (dlogits != nullptr) dlogits->setZero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      loss += bce_logit(logits(i, j), targets(i, j));
      if (dlogits != nullptr)
        (*dlogits)(i, j) = sigmoid(logits(i, j)) - targets(i, j);
    }
  }
  return loss;
}

double loss_mse(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets,
                Eigen::MatrixXd* dpreds) {
  if (preds.rows() != targets.rows() || preds.cols() != targets.cols())
    throw std::invalid_argument("preds/targets shape mismatch");
  const Eigen::MatrixXd err = preds - targets;
  if (dpreds != nullptr) *dpreds = 2.0 * err;
  return err.squaredNorm();
}

double loss_weighted_mse(const Eigen::VectorXd& y_hat,
                         const Eigen::VectorXd& y, double weight,
                         Eigen::VectorXd* dy_hat) {
  if (y_hat.size() != y.size())
    throw std::invalid_argument("prediction/target size mismatch");
  const Eigen::VectorXd err = y_hat - y;
  if (dy_hat != nullptr) *dy_hat = 2.0 * weight * err;
  return weight * err.squaredNorm();
}

// ---------------------------------------------------------------------------

void SWNet::init(PathKind k, int channels, int treat_dims, int d_z, int d_h,
                 Rng& rng) {
  kind = k;
  d_a = treat_dims;
  input.init(d_z, channels, rng);
  field.init(d_z, channels, d_h, rng);
  head_intensity.init(1, d_z, rng);
  head_propensity.init(d_a, d_z, rng);
}

std::vector<ParamRef> SWNet::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  input.collect(prefix + ".input", out);
  field.collect(prefix, out);
  head_intensity.collect(prefix + ".intensity", out);
  head_propensity.collect(prefix + ".propensity", out);
  return out;
}

void SWNet::zero_grad() {
  input.zero_grad();
  field.zero_grad();
  head_intensity.zero_grad();
  head_propensity.zero_grad();
}

DayProbs SWNet::forward_probs(const ControlPath& path, int substeps) const {
  const Eigen::VectorXd x0 = path.channels.row(0).transpose();
  const Eigen::VectorXd z0 = input.forward(x0);
  const CDEState state = euler_rollout(field, z0, path, 0, path.points() - 1);
  const int days = (path.points() - 1) / substeps;
  DayProbs probs;
  probs.event_prob.resize(days);
  probs.arm_prob.resize(days, d_a);
  for (int d = 1; d <= days; ++d) {
    const Eigen::VectorXd z = state.z.row((d - 1) * substeps).transpose();
    probs.event_prob(d - 1) = sigmoid(head_intensity.forward(z)(0));
    const Eigen::VectorXd l = head_propensity.forward(z);
    for (int j = 0; j < d_a; ++j) probs.arm_prob(d - 1, j) = sigmoid(l(j));
  }
  return probs;
}

double SWNet::train_pass(const ControlPath& path, const std::vector<int>& a_mask,
                         const Eigen::MatrixXd& a, int substeps, double scale,
                         double dropout, Rng* rng, double* bce_out,
                         double* ce_out) {
  const Eigen::VectorXd x0 = path.channels.row(0).transpose();
  const Eigen::VectorXd z0 = input.forward(x0);
  const CDEState state =
      euler_rollout(field, z0, path, 0, path.points() - 1, dropout, rng);
  const int days = (path.points() - 1) / substeps;
  if (static_cast<int>(a_mask.size()) < days + 1)
    throw std::invalid_argument("decision mask shorter than path");

  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(path.points(), field.d_z);
  double bce = 0.0, ce = 0.0;
  for (int d = 1; d <= days; ++d) {
    const int idx = (d - 1) * substeps;
    const Eigen::VectorXd z = state.z.row(idx).transpose();
    const double y = a_mask[static_cast<std::size_t>(d)] ? 1.0 : 0.0;
    const double logit = head_intensity.forward(z)(0);
    bce += bce_logit(logit, y);
    Eigen::VectorXd dlog(1);
    dlog(0) = (sigmoid(logit) - y) * scale;
    dz.row(idx) += head_intensity.backward(z, dlog).transpose();
    if (y > 0.5) {
      const Eigen::VectorXd logits = head_propensity.forward(z);
      Eigen::VectorXd dlogits(d_a);
      for (int j = 0; j < d_a; ++j) {
        ce += bce_logit(logits(j), a(d, j));
        dlogits(j) = (sigmoid(logits(j)) - a(d, j)) * scale;
      }
      dz.row(idx) += head_propensity.backward(z, dlogits).transpose();
    }
  }
  const Eigen::VectorXd dz0 = rollout_backward(field, state, path, dz);
  input.backward(x0, dz0);
  if (bce_out != nullptr) *bce_out = bce;
  if (ce_out != nullptr) *ce_out = ce;
  return bce + ce;
}

// ---------------------------------------------------------------------------

void EncoderNet::init(int channels, int treat_dims, int d_y, int d_z, int d_h,
                      Rng& rng) {
  d_a = treat_dims;
  input.init(d_z, channels, rng);
  field.init(d_z, channels, d_h, rng);
  head.init(d_y, d_z + d_a, rng);
}

std::vector<ParamRef> EncoderNet::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  input.collect(prefix + ".input", out);
  field.collect(prefix, out);
  head.collect(prefix + ".head", out);
  return out;
}

void EncoderNet::zero_grad() {
  input.zero_grad();
  field.zero_grad();
  head.zero_grad();
}

Eigen::VectorXd EncoderNet::encode(const ControlPath& path) const {
  const Eigen::VectorXd z0 = input.forward(path.channels.row(0).transpose());
  const CDEState state = euler_rollout(field, z0, path, 0, path.points() - 1);
  return state.z.row(state.z.rows() - 1).transpose();
}

Eigen::VectorXd EncoderNet::predict(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& a) const {
  Eigen::VectorXd u(z.size() + a.size());
  u << z, a;
  return head.forward(u);
}

double EncoderNet::train_pass(const ControlPath& path,
                              const std::vector<Target>& targets, int substeps,
                              double scale, double dropout, Rng* rng) {
  if (targets.empty()) return 0.0;
  const Eigen::VectorXd x0 = path.channels.row(0).transpose();
  const Eigen::VectorXd z0 = input.forward(x0);
  const CDEState state =
      euler_rollout(field, z0, path, 0, path.points() - 1, dropout, rng);

  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(path.points(), field.d_z);
  double loss = 0.0;
  for (const Target& tg : targets) {
    const int idx = (tg.day - 1) * substeps;
    if (idx < 0 || idx >= path.points())
      throw std::invalid_argument("target day outside path");
    const Eigen::VectorXd z = state.z.row(idx).transpose();
    Eigen::VectorXd u(z.size() + d_a);
    u << z, tg.a;
    const Eigen::VectorXd pred = head.forward(u);
    const Eigen::VectorXd err = pred - tg.y;
    loss += err.squaredNorm();
    const Eigen::VectorXd du = head.backward(u, 2.0 * scale * err);
    dz.row(idx) += du.head(z.size()).transpose();
  }
  const Eigen::VectorXd dz0 = rollout_backward(field, state, path, dz);
  input.backward(x0, dz0);
  return loss;
}

// ---------------------------------------------------------------------------

void DecoderNet::init(int encoder_latent, int channels, int treat_dims, int d_y,
                      int d_z, int d_h, Rng& rng) {
  d_a = treat_dims;
  input_map.init(d_z, encoder_latent, rng);
  field.init(d_z, channels, d_h, rng);
  head.init(d_y, d_z + d_a, rng);
}

std::vector<ParamRef> DecoderNet::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  input_map.collect(prefix + ".input", out);
  field.collect(prefix, out);
  head.collect(prefix + ".head", out);
  return out;
}

void DecoderNet::zero_grad() {
  input_map.zero_grad();
  field.zero_grad();
  head.zero_grad();
}

Eigen::VectorXd DecoderNet::predict(const Eigen::VectorXd& z_enc,
                                    const ControlPath& plan_path,
                                    const Eigen::VectorXd& a_end) const {
  const Eigen::VectorXd z0 = input_map.forward(z_enc);
  const CDEState state =
      euler_rollout(field, z0, plan_path, 0, plan_path.points() - 1);
  Eigen::VectorXd u(field.d_z + d_a);
  u << state.z.row(state.z.rows() - 1).transpose(), a_end;
  return head.forward(u);
}

double DecoderNet::train_pass(const Eigen::VectorXd& z_enc,
                              const ControlPath& plan_path,
                              const Eigen::VectorXd& a_end,
                              const Eigen::VectorXd& y, double weight,
                              double scale, double dropout, Rng* rng) {
  const Eigen::VectorXd z0 = input_map.forward(z_enc);
  const CDEState state =
      euler_rollout(field, z0, plan_path, 0, plan_path.points() - 1, dropout, rng);
  const int last = static_cast<int>(state.z.rows()) - 1;
  Eigen::VectorXd u(field.d_z + d_a);
  u << state.z.row(last).transpose(), a_end;
  const Eigen::VectorXd pred = head.forward(u);
  const Eigen::VectorXd err = pred - y;
  const double loss = weight * err.squaredNorm();

  const Eigen::VectorXd du = head.backward(u, 2.0 * weight * scale * err);
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(plan_path.points(), field.d_z);
  dz.row(last) = du.head(field.d_z).transpose();
  const Eigen::VectorXd dz0 = rollout_backward(field, state, plan_path, dz);
  input_map.backward(z_enc, dz0);
  return loss;
}

}  // namespace scipnet
