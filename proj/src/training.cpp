#include "scipnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace scipnet {

namespace {

void shuffle(std::vector<int>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.below(i)]);
}

int day_of(double t) { return static_cast<int>(std::llround(t)); }

double clamp_prob(double p) { return std::min(std::max(p, 1e-12), 1.0 - 1e-12); }

// Per-arm Bernoulli factorization of the treatment-vector propensity.
double arm_product(const Eigen::MatrixXd& arm_prob, int day_row,
                   const Eigen::VectorXd& a) {
  double pi = 1.0;
  for (int j = 0; j < a.size(); ++j) {
    const double q = arm_prob(day_row, j);
    pi *= a(j) > 0.5 ? q : 1.0 - q;
  }
  return pi;
}

std::vector<EncoderNet::Target> encoder_targets(const Trajectory& traj) {
  std::vector<EncoderNet::Target> out;
  for (int i = 0; i < traj.n(); ++i) {
    const int d = day_of(traj.times[i]);
    if (d < 1 || !traj.y_mask[i]) continue;
    out.push_back({d, traj.y.row(i).transpose(), traj.a.row(i).transpose()});
  }
  return out;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},        {"lr", c.lr},
          {"batch_sw", c.batch_sw},    {"batch_decoder", c.batch_decoder},
          {"clip_norm", c.clip_norm},  {"d_z", c.d_z},
          {"d_hidden", c.d_hidden},    {"dropout", c.dropout},
          {"variant", c.variant},      {"horizon", c.horizon},
          {"grid_step", c.grid_step},  {"val_fraction", c.val_fraction},
          {"seed", c.seed}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.batch_sw = j.at("batch_sw").get<int>();
  c.batch_decoder = j.at("batch_decoder").get<int>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.d_z = j.at("d_z").get<int>();
  c.d_hidden = j.at("d_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.variant = j.at("variant").get<std::string>();
  c.horizon = j.at("horizon").get<double>();
  c.grid_step = j.at("grid_step").get<double>();
  c.val_fraction = j.at("val_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace

Normalization compute_normalization(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw std::invalid_argument("empty dataset");
  const int dy = trajs[0].dy();
  const int dx = trajs[0].dx();
  Normalization norm;
  norm.y_mean.setZero(dy);
  norm.y_std.setOnes(dy);
  norm.x_mean.setZero(dx);
  norm.x_std.setOnes(dx);

  Eigen::VectorXd ysum = Eigen::VectorXd::Zero(dy),
                  ysq = Eigen::VectorXd::Zero(dy);
  Eigen::VectorXd xsum = Eigen::VectorXd::Zero(dx),
                  xsq = Eigen::VectorXd::Zero(dx);
  long ny = 0, nx = 0;
  for (const auto& t : trajs) {
    for (int i = 0; i < t.n(); ++i) {
      if (t.y_mask[i]) {
        ysum += t.y.row(i).transpose();
        ysq += t.y.row(i).transpose().cwiseAbs2();
        ++ny;
        xsum += t.x.row(i).transpose();
        xsq += t.x.row(i).transpose().cwiseAbs2();
        ++nx;
      }
    }
  }
  if (ny > 1) {
    norm.y_mean = ysum / static_cast<double>(ny);
    const Eigen::VectorXd var =
        (ysq / static_cast<double>(ny) - norm.y_mean.cwiseAbs2())
            .cwiseMax(1e-12);
    norm.y_std = var.cwiseSqrt();
  }
  if (nx > 1) {
    norm.x_mean = xsum / static_cast<double>(nx);
    const Eigen::VectorXd var =
        (xsq / static_cast<double>(nx) - norm.x_mean.cwiseAbs2())
            .cwiseMax(1e-12);
    norm.x_std = var.cwiseSqrt();
  }
  return norm;
}

std::vector<Trajectory> normalize_dataset(const std::vector<Trajectory>& trajs,
                                          const Normalization& norm) {
  std::vector<Trajectory> out = trajs;
  for (auto& t : out) {
    for (int i = 0; i < t.n(); ++i) {
      if (t.y_mask[i])
        t.y.row(i) = (t.y.row(i).transpose() - norm.y_mean)
                         .cwiseQuotient(norm.y_std)
                         .transpose();
      t.x.row(i) = (t.x.row(i).transpose() - norm.x_mean)
                       .cwiseQuotient(norm.x_std)
                       .transpose();
    }
  }
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<StageMetric>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "epoch,stage,loss\n";
  for (const auto& m : metrics)
    out << m.epoch << "," << m.stage << "," << m.loss << "\n";
}

void train_sw(SWNet& net, const std::vector<Trajectory>& data,
              const std::vector<ControlPath>& paths,
              const std::vector<int>& train_idx,
              const std::vector<int>& val_idx, const TrainConfig& cfg,
              Rng& rng, std::vector<StageMetric>& metrics,
              const std::string& stage) {
  const int substeps =
      static_cast<int>(std::llround(1.0 / cfg.grid_step));
  std::vector<ParamRef> params = net.params(stage);
  AdamState adam;
  std::vector<int> order = train_idx;

  const auto eval_loss = [&](const std::vector<int>& idx) {
    double loss = 0.0;
    for (int i : idx) {
      const DayProbs probs = net.forward_probs(paths[i], substeps);
      const Trajectory& tr = data[i];
      for (int d = 1; d <= probs.event_prob.size(); ++d) {
        const double y = tr.a_mask[static_cast<std::size_t>(d)] ? 1.0 : 0.0;
        const double p = clamp_prob(probs.event_prob(d - 1));
        loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        if (y > 0.5) {
          for (int j = 0; j < net.d_a; ++j) {
            const double q = clamp_prob(probs.arm_prob(d - 1, j));
            const double a = tr.a(d, j);
            loss -= a * std::log(q) + (1.0 - a) * std::log(1.0 - q);
          }
        }
      }
    }
    return loss / static_cast<double>(idx.size());
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double train_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_sw)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_sw));
      const double scale = 1.0 / static_cast<double>(end - start);
      net.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const int i = order[k];
        train_loss += scale * net.train_pass(paths[i], data[i].a_mask,
                                             data[i].a, substeps, scale,
                                             cfg.dropout, &rng);
      }
      adam_update(params, adam, cfg.lr, cfg.clip_norm);
    }
    if (!std::isfinite(train_loss))
      throw std::runtime_error("divergence at epoch " + std::to_string(epoch));
    const double loss = val_idx.empty() ? train_loss : eval_loss(val_idx);
    metrics.push_back({epoch, stage, loss});
  }
}

void train_encoder(EncoderNet& net, const std::vector<Trajectory>& data,
                   const std::vector<ControlPath>& paths,
                   const std::vector<int>& train_idx,
                   const std::vector<int>& val_idx, const TrainConfig& cfg,
                   Rng& rng, std::vector<StageMetric>& metrics) {
  const int substeps =
      static_cast<int>(std::llround(1.0 / cfg.grid_step));
  std::vector<ParamRef> params = net.params("e");
  AdamState adam;
  std::vector<int> order = train_idx;

  std::vector<std::vector<EncoderNet::Target>> targets(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    targets[i] = encoder_targets(data[i]);

  const auto eval_loss = [&](const std::vector<int>& idx) {
    double loss = 0.0;
    long count = 0;
    for (int i : idx) {
      if (targets[static_cast<std::size_t>(i)].empty()) continue;
      const Eigen::VectorXd z0 =
          net.input.forward(paths[i].channels.row(0).transpose());
      const CDEState state =
          euler_rollout(net.field, z0, paths[i], 0, paths[i].points() - 1);
      for (const auto& tg : targets[static_cast<std::size_t>(i)]) {
        const Eigen::VectorXd z =
            state.z.row((tg.day - 1) * substeps).transpose();
        loss += (net.predict(z, tg.a) - tg.y).squaredNorm();
        ++count;
      }
    }
    return count > 0 ? loss / static_cast<double>(count) : 0.0;
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double train_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_sw)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_sw));
      const double scale = 1.0 / static_cast<double>(end - start);
      net.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const int i = order[k];
        train_loss += scale * net.train_pass(
                                  paths[i], targets[static_cast<std::size_t>(i)],
                                  substeps, scale, cfg.dropout, &rng);
      }
      adam_update(params, adam, cfg.lr, cfg.clip_norm);
    }
    if (!std::isfinite(train_loss))
      throw std::runtime_error("divergence at epoch " + std::to_string(epoch));
    const double loss = val_idx.empty() ? train_loss : eval_loss(val_idx);
    metrics.push_back({epoch, "encoder", loss});
  }
}

WeightCache cache_weights(const std::vector<const Trajectory*>& traj_of,
                          const std::vector<Instance>& instances,
                          const SWNet& s, const SWNet& w,
                          const std::string& variant, const TrainConfig& cfg) {
  if (traj_of.size() != instances.size())
    throw std::invalid_argument("instance/trajectory count mismatch");
  WeightCache cache;
  cache.weights.assign(instances.size(), 1.0);
  cache.raw.assign(instances.size(), 1.0);
  if (variant == "unweighted") return cache;
  if (variant != "scip" && variant != "cip")
    throw std::invalid_argument("unknown variant " + variant);

  const int substeps = static_cast<int>(std::llround(1.0 / cfg.grid_step));
  std::unordered_map<const Trajectory*, std::pair<DayProbs, DayProbs>> probs;
  const auto get_probs = [&](const Trajectory* tr)
      -> const std::pair<DayProbs, DayProbs>& {
    auto it = probs.find(tr);
    if (it == probs.end()) {
      const ControlPath treat =
          build_control_path(*tr, tr->tau, cfg.grid_step, PathKind::TreatmentOnly);
      const ControlPath full =
          build_control_path(*tr, tr->tau, cfg.grid_step, PathKind::Full);
      it = probs.emplace(tr, std::make_pair(s.forward_probs(treat, substeps),
                                            w.forward_probs(full, substeps)))
               .first;
    }
    return it->second;
  };

  for (std::size_t k = 0; k < instances.size(); ++k) {
    const Instance& inst = instances[k];
    const auto& [sp, wp] = get_probs(traj_of[k]);
    double w_prod = 1.0, xi_prod = 1.0;
    int prev = day_of(inst.prefix.cutoff);
    for (int j = 0; j < inst.factual.jumps(); ++j) {
      const int dj = day_of(inst.factual.jump_times[j]);
      const Eigen::VectorXd aj = inst.factual.values.row(j).transpose();
      double int_w = 0.0, int_s = 0.0;
      for (int d = prev + 1; d <= dj; ++d) {
        int_w += std::max(wp.event_prob(d - 1), kIntensityFloor);
        int_s += std::max(sp.event_prob(d - 1), kIntensityFloor);
      }
      double lam_w = wp.event_prob(dj - 1);
      double lam_s = sp.event_prob(dj - 1);
      double pi_w = arm_product(wp.arm_prob, dj - 1, aj);
      double pi_s = arm_product(sp.arm_prob, dj - 1, aj);
      bool floored = false;
      if (lam_w < kIntensityFloor) { lam_w = kIntensityFloor; floored = true; }
      if (lam_s < kIntensityFloor) { lam_s = kIntensityFloor; floored = true; }
      if (pi_w < kPropensityFloor) { pi_w = kPropensityFloor; floored = true; }
      if (pi_s < kPropensityFloor) { pi_s = kPropensityFloor; floored = true; }
      ++cache.n_factors;
      if (floored) ++cache.n_floored;
      w_prod *= std::exp(int_w) / (lam_w * pi_w);
      xi_prod *= lam_s * pi_s / std::exp(int_s);
      prev = dj;
    }
    const double raw = variant == "cip" ? w_prod : w_prod * xi_prod;
    if (!std::isfinite(raw)) {
      cache.raw[k] = 0.0;
      ++cache.n_skipped;
    } else {
      cache.raw[k] = raw;
    }
  }

  // truncate/normalize over non-skipped instances only
  std::vector<double> pool;
  std::vector<std::size_t> pool_idx;
  for (std::size_t k = 0; k < cache.raw.size(); ++k) {
    if (cache.raw[k] > 0.0) {
      pool.push_back(cache.raw[k]);
      pool_idx.push_back(k);
    } else {
      cache.weights[k] = 0.0;
    }
  }
  if (!pool.empty()) {
    const std::vector<double> normed = truncate_normalize(pool);
    for (std::size_t k = 0; k < pool_idx.size(); ++k)
      cache.weights[pool_idx[k]] = normed[k];
  }
  if (cache.n_factors > 0 &&
      static_cast<double>(cache.n_floored) >
          0.2 * static_cast<double>(cache.n_factors))
    cache.floor_warning = true;
  return cache;
}

DecoderInstance make_decoder_instance(const EncoderNet& enc,
                                      const Instance& inst,
                                      const TrainConfig& cfg) {
  const Trajectory& tr = *inst.prefix.traj;
  DecoderInstance out;
  const ControlPath prefix_path =
      build_control_path(tr, inst.prefix.cutoff, cfg.grid_step, PathKind::Full);
  out.z_enc = enc.encode(prefix_path);

  // treatment state at the cutoff left limit
  Eigen::VectorXd a_prev = Eigen::VectorXd::Zero(tr.da());
  int n_prev = 0;
  for (int i = 0; i < tr.n(); ++i) {
    if (tr.times[i] >= inst.prefix.cutoff - 1e-9) break;
    if (tr.a_mask[i]) {
      a_prev = tr.a.row(i).transpose();
      ++n_prev;
    }
  }
  out.plan_path =
      build_plan_path(inst.factual, inst.horizon, tr.tau, cfg.grid_step, a_prev,
                      static_cast<double>(n_prev) / tr.tau);
  out.a_end = inst.factual.jumps() > 0
                  ? inst.factual.values.row(inst.factual.jumps() - 1).transpose()
                  : a_prev;
  out.y_target = inst.y_target;
  return out;
}

void train_decoder(DecoderNet& net, const std::vector<DecoderInstance>& insts,
                   const std::vector<double>& weights,
                   const std::vector<int>& train_idx,
                   const std::vector<int>& val_idx, const TrainConfig& cfg,
                   Rng& rng, std::vector<StageMetric>& metrics) {
  if (insts.size() != weights.size())
    throw std::invalid_argument("instance/weight count mismatch");
  std::vector<ParamRef> params = net.params("d");
  AdamState adam;
  std::vector<int> order = train_idx;

  const auto eval_loss = [&](const std::vector<int>& idx) {
    double loss = 0.0;
    for (int i : idx) {
      const auto& di = insts[static_cast<std::size_t>(i)];
      loss += (net.predict(di.z_enc, di.plan_path, di.a_end) - di.y_target)
                  .squaredNorm();
    }
    return idx.empty() ? 0.0 : loss / static_cast<double>(idx.size());
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double train_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_decoder)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.batch_decoder));
      const double scale = 1.0 / static_cast<double>(end - start);
      net.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& di = insts[static_cast<std::size_t>(order[k])];
        train_loss += scale * net.train_pass(
                                  di.z_enc, di.plan_path, di.a_end, di.y_target,
                                  weights[static_cast<std::size_t>(order[k])],
                                  scale, cfg.dropout, &rng);
      }
      adam_update(params, adam, cfg.lr, cfg.clip_norm);
    }
    if (!std::isfinite(train_loss))
      throw std::runtime_error("divergence at epoch " + std::to_string(epoch));
    const double loss = val_idx.empty() ? train_loss : eval_loss(val_idx);
    metrics.push_back({epoch, "decoder", loss});
  }
}

std::vector<ParamRef> ModelBundle::all_params() {
  std::vector<ParamRef> out;
  for (auto& p : s.params("s")) out.push_back(p);
  for (auto& p : w.params("w")) out.push_back(p);
  for (auto& p : enc.params("e")) out.push_back(p);
  for (auto& p : dec.params("d")) out.push_back(p);
  return out;
}

void ModelBundle::save(const std::string& dir) {
  nlohmann::json j;
  j["config"] = config_to_json(config);
  j["norm"] = {{"y_mean", to_vec(norm.y_mean)},
               {"y_std", to_vec(norm.y_std)},
               {"x_mean", to_vec(norm.x_mean)},
               {"x_std", to_vec(norm.x_std)}};
  j["dims"] = {{"d_y", d_y},
               {"d_x", d_x},
               {"d_a", d_a},
               {"d_static", d_static},
               {"channels_full", channels_full},
               {"channels_treat", channels_treat},
               {"substeps", substeps}};
  std::ofstream out(dir + "/bundle.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + dir + "/bundle.json");
  out << j.dump(2) << "\n";
  const std::vector<ParamRef> params = all_params();
  save_params(params, dir + "/params");
}

ModelBundle ModelBundle::load(const std::string& dir) {
  std::ifstream in(dir + "/bundle.json");
  if (!in) throw std::runtime_error("cannot open " + dir + "/bundle.json");
  nlohmann::json j;
  in >> j;
  ModelBundle b;
  b.config = config_from_json(j.at("config"));
  b.norm.y_mean = from_vec(j.at("norm").at("y_mean").get<std::vector<double>>());
  b.norm.y_std = from_vec(j.at("norm").at("y_std").get<std::vector<double>>());
  b.norm.x_mean = from_vec(j.at("norm").at("x_mean").get<std::vector<double>>());
  b.norm.x_std = from_vec(j.at("norm").at("x_std").get<std::vector<double>>());
  const auto& dims = j.at("dims");
  b.d_y = dims.at("d_y").get<int>();
  b.d_x = dims.at("d_x").get<int>();
  b.d_a = dims.at("d_a").get<int>();
  b.d_static = dims.at("d_static").get<int>();
  b.channels_full = dims.at("channels_full").get<int>();
  b.channels_treat = dims.at("channels_treat").get<int>();
  b.substeps = dims.at("substeps").get<int>();

  Rng init(0);
  const int dz_t = b.config.d_z > 0 ? b.config.d_z : 2 * b.channels_treat;
  const int dz_f = b.config.d_z > 0 ? b.config.d_z : 2 * b.channels_full;
  const int dh_t = b.config.d_hidden > 0 ? b.config.d_hidden : 2 * dz_t;
  const int dh_f = b.config.d_hidden > 0 ? b.config.d_hidden : 2 * dz_f;
  b.s.init(PathKind::TreatmentOnly, b.channels_treat, b.d_a, dz_t, dh_t, init);
  b.w.init(PathKind::Full, b.channels_full, b.d_a, dz_f, dh_f, init);
  b.enc.init(b.channels_full, b.d_a, b.d_y, dz_f, dh_f, init);
  b.dec.init(dz_f, b.channels_treat, b.d_a, b.d_y, dz_t, dh_t, init);
  std::vector<ParamRef> params = b.all_params();
  load_params(params, dir + "/params");
  return b;
}

ModelBundle make_bundle(const std::vector<Trajectory>& raw,
                        const TrainConfig& cfg) {
  if (raw.empty()) throw std::invalid_argument("empty dataset");
  ModelBundle b;
  b.config = cfg;
  b.norm = compute_normalization(raw);

  const Trajectory& first = raw[0];
  b.d_y = first.dy();
  b.d_x = first.dx();
  b.d_a = first.da();
  b.d_static = static_cast<int>(first.statics.size());
  b.channels_treat = b.d_a + 2;
  b.channels_full = b.d_y + b.d_x + b.d_a + 3 + b.d_static;
  b.substeps = static_cast<int>(std::llround(1.0 / cfg.grid_step));

  Rng master(cfg.seed);
  Rng rng_init = master.split(1);
  const int dz_t = cfg.d_z > 0 ? cfg.d_z : 2 * b.channels_treat;
  const int dz_f = cfg.d_z > 0 ? cfg.d_z : 2 * b.channels_full;
  const int dh_t = cfg.d_hidden > 0 ? cfg.d_hidden : 2 * dz_t;
  const int dh_f = cfg.d_hidden > 0 ? cfg.d_hidden : 2 * dz_f;
  b.s.init(PathKind::TreatmentOnly, b.channels_treat, b.d_a, dz_t, dh_t,
           rng_init);
  b.w.init(PathKind::Full, b.channels_full, b.d_a, dz_f, dh_f, rng_init);
  b.enc.init(b.channels_full, b.d_a, b.d_y, dz_f, dh_f, rng_init);
  b.dec.init(dz_f, b.channels_treat, b.d_a, b.d_y, dz_t, dh_t, rng_init);
  return b;
}

PipelineResult run_pipeline(const std::vector<Trajectory>& raw,
                            const TrainConfig& cfg) {
  PipelineResult result;
  result.bundle = make_bundle(raw, cfg);
  ModelBundle& b = result.bundle;
  const std::vector<Trajectory> data = normalize_dataset(raw, b.norm);

  std::vector<ControlPath> treat_paths, full_paths;
  treat_paths.reserve(data.size());
  full_paths.reserve(data.size());
  for (const auto& tr : data) {
    treat_paths.push_back(
        build_control_path(tr, tr.tau, cfg.grid_step, PathKind::TreatmentOnly));
    full_paths.push_back(
        build_control_path(tr, tr.tau, cfg.grid_step, PathKind::Full));
  }

  const int n = static_cast<int>(data.size());
  const int n_val = static_cast<int>(std::floor(cfg.val_fraction * n));
  std::vector<int> train_idx, val_idx;
  for (int i = 0; i < n - n_val; ++i) train_idx.push_back(i);
  for (int i = n - n_val; i < n; ++i) val_idx.push_back(i);
  if (train_idx.empty()) throw std::invalid_argument("empty training split");

  Rng master(cfg.seed);
  Rng rng_s = master.split(2);
  Rng rng_w = master.split(3);
  Rng rng_e = master.split(4);
  Rng rng_d = master.split(5);

  train_sw(b.s, data, treat_paths, train_idx, val_idx, cfg, rng_s,
           result.metrics, "stability");
  train_sw(b.w, data, full_paths, train_idx, val_idx, cfg, rng_w,
           result.metrics, "weight");

  std::vector<Instance> instances;
  std::vector<const Trajectory*> traj_of;
  std::vector<int> inst_train, inst_val;
  for (int i = 0; i < n; ++i) {
    const bool is_train = i < n - n_val;
    for (auto& inst : slice_instances(data[static_cast<std::size_t>(i)],
                                      {cfg.horizon})) {
      (is_train ? inst_train : inst_val)
          .push_back(static_cast<int>(instances.size()));
      traj_of.push_back(&data[static_cast<std::size_t>(i)]);
      instances.push_back(std::move(inst));
    }
  }
  result.cache =
      cache_weights(traj_of, instances, b.s, b.w, cfg.variant, cfg);

  train_encoder(b.enc, data, full_paths, train_idx, val_idx, cfg, rng_e,
                result.metrics);

  std::vector<DecoderInstance> dec_insts;
  dec_insts.reserve(instances.size());
  for (const auto& inst : instances)
    dec_insts.push_back(make_decoder_instance(b.enc, inst, cfg));
  train_decoder(b.dec, dec_insts, result.cache.weights, inst_train, inst_val,
                cfg, rng_d, result.metrics);
  return result;
}

}  // namespace scipnet
