#include "scipnet/neuralcde.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace scipnet {

void Linear::init(int out, int in, Rng& rng, double scale) {
  const double bound = scale / std::sqrt(static_cast<double>(in));
  W.resize(out, in);
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < in; ++j) W(i, j) = rng.uniform(-bound, bound);
  b.setZero(out, 1);
  zero_grad();
}

void Linear::zero_grad() {
  dW.setZero(W.rows(), W.cols());
  db.setZero(b.rows(), 1);
}

Eigen::VectorXd Linear::backward(const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& dout) {
  dW.noalias() += dout * u.transpose();
  db.col(0) += dout;
  return W.transpose() * dout;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".W", &W, &dW});
  out.push_back({prefix + ".b", &b, &db});
}

void CdeField::init(int latent, int channels, int hidden, Rng& rng) {
  d_z = latent;
  d_c = channels;
  d_h = hidden;
  layer1.init(d_h, d_z + 1, rng);
  // small output layer keeps early rollouts near-constant
  layer2.init(d_z * d_c, d_h, rng, 0.1);
}

void CdeField::zero_grad() {
  layer1.zero_grad();
  layer2.zero_grad();
}

void CdeField::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  layer1.collect(prefix + ".field1", out);
  layer2.collect(prefix + ".field2", out);
}

CDEState euler_rollout(const CdeField& field, const Eigen::VectorXd& z0,
                       const ControlPath& path, int i0, int i1,
                       double dropout_rate, Rng* rng) {
  if (i0 < 0 || i1 >= path.points() || i0 > i1)
    throw std::invalid_argument("rollout window outside path grid");
  const int steps = i1 - i0;
  CDEState state;
  state.first = i0;
  state.times.resize(steps + 1);
  state.z.resize(steps + 1, field.d_z);
  state.hidden.resize(steps, field.d_h);
  state.dropout.setOnes(steps, field.d_h);
  state.z.row(0) = z0.transpose();
  for (int k = 0; k <= steps; ++k) state.times[k] = path.grid[i0 + k];

  Eigen::VectorXd u(field.d_z + 1);
  for (int k = 0; k < steps; ++k) {
    u.head(field.d_z) = state.z.row(k).transpose();
    u(field.d_z) = state.times[k] / path.tau;
    Eigen::VectorXd h = field.layer1.forward(u).array().tanh();
    state.hidden.row(k) = h.transpose();
    if (rng != nullptr && dropout_rate > 0.0) {
      const double keep = 1.0 - dropout_rate;
      for (int i = 0; i < field.d_h; ++i)
        state.dropout(k, i) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      h.array() *= state.dropout.row(k).transpose().array();
    }
    const Eigen::VectorXd g = field.layer2.forward(h);
    const Eigen::Map<const Eigen::MatrixXd> G(g.data(), field.d_z, field.d_c);
    const Eigen::VectorXd dx =
        (path.channels.row(i0 + k + 1) - path.channels.row(i0 + k)).transpose();
    state.z.row(k + 1) = state.z.row(k) + (G * dx).transpose();
    if (!state.z.row(k + 1).allFinite())
      throw std::runtime_error("divergence at step " + std::to_string(k + 1));
  }
  return state;
}

Eigen::VectorXd rollout_backward(CdeField& field, const CDEState& state,
                                 const ControlPath& path,
                                 const Eigen::MatrixXd& dz) {
  const int steps = static_cast<int>(state.times.size()) - 1;
  Eigen::VectorXd dzk = dz.row(steps).transpose();
  Eigen::VectorXd u(field.d_z + 1);
  for (int k = steps - 1; k >= 0; --k) {
    const Eigen::VectorXd dx =
        (path.channels.row(state.first + k + 1) -
         path.channels.row(state.first + k))
            .transpose();
    const Eigen::MatrixXd dG = dzk * dx.transpose();
    const Eigen::Map<const Eigen::VectorXd> dg(dG.data(),
                                               field.d_z * field.d_c);
    const Eigen::VectorXd h_dropped =
        state.hidden.row(k).transpose().array() *
        state.dropout.row(k).transpose().array();
    const Eigen::VectorXd dh_dropped = field.layer2.backward(h_dropped, dg);
    const Eigen::VectorXd dh =
        dh_dropped.array() * state.dropout.row(k).transpose().array();
    const Eigen::VectorXd dpre =
        dh.array() *
        (1.0 - state.hidden.row(k).transpose().array().square());
    u.head(field.d_z) = state.z.row(k).transpose();
    u(field.d_z) = state.times[k] / path.tau;
    const Eigen::VectorXd du = field.layer1.backward(u, dpre);
    dzk += du.head(field.d_z);           // through the field input
    dzk += dz.row(k).transpose();        // head injection at this state
  }
  return dzk;
}

void adam_update(std::vector<ParamRef>& params, AdamState& state, double lr,
                 double clip_norm) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
      state.v.emplace_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
    }
  }
  double scale = 1.0;
  if (clip_norm > 0.0) {
    const double norm = global_grad_norm(params);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  state.step += 1;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::MatrixXd g = *params[i].grad * scale;
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g.array().square().matrix();
    const Eigen::ArrayXXd mhat = state.m[i].array() / bc1;
    const Eigen::ArrayXXd vhat = state.v[i].array() / bc2;
    params[i].value->array() -= lr * mhat / (vhat.sqrt() + eps);
  }
}

double global_grad_norm(const std::vector<ParamRef>& params) {
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad->squaredNorm();
  return std::sqrt(sq);
}

void save_params(const std::vector<ParamRef>& params,
                 const std::string& base_path) {
  nlohmann::json manifest;
  manifest["dtype"] = "float64-le";
  nlohmann::json arrays = nlohmann::json::array();
  std::ofstream blob(base_path + ".bin", std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open " + base_path + ".bin");
  std::size_t offset = 0;
  for (const auto& p : params) {
    nlohmann::json entry;
    entry["name"] = p.name;
    entry["shape"] = {p.value->rows(), p.value->cols()};
    entry["offset"] = offset;
    arrays.push_back(entry);
    // column-major, matching Eigen's storage
    blob.write(reinterpret_cast<const char*>(p.value->data()),
               static_cast<std::streamsize>(p.value->size() * sizeof(double)));
    offset += static_cast<std::size_t>(p.value->size()) * sizeof(double);
  }
  manifest["arrays"] = arrays;
  std::ofstream mf(base_path + ".json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open " + base_path + ".json");
  mf << manifest.dump(2) << "\n";
}

void load_params(std::vector<ParamRef>& params, const std::string& base_path) {
  std::ifstream mf(base_path + ".json");
  if (!mf) throw std::runtime_error("cannot open " + base_path + ".json");
  nlohmann::json manifest;
  mf >> manifest;
  std::ifstream blob(base_path + ".bin", std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open " + base_path + ".bin");
  for (auto& p : params) {
    bool found = false;
    for (const auto& entry : manifest.at("arrays")) {
      if (entry.at("name").get<std::string>() != p.name) continue;
      const long rows = entry.at("shape").at(0).get<long>();
      const long cols = entry.at("shape").at(1).get<long>();
      if (rows != p.value->rows() || cols != p.value->cols())
        throw std::runtime_error("shape mismatch for " + p.name);
      blob.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::size_t>()));
      blob.read(reinterpret_cast<char*>(p.value->data()),
                static_cast<std::streamsize>(p.value->size() * sizeof(double)));
      found = true;
      break;
    }
    if (!found) throw std::runtime_error("missing parameter " + p.name);
  }
}

}  // namespace scipnet
