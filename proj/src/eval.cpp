#include "scipnet/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace scipnet {

namespace {

constexpr double kTimeEps = 1e-9;

// Treatment state just before the cutoff: last decided treatment and the
// decision count, both in the left-limit sense.
void cutoff_state(const Trajectory& traj, double cutoff, Eigen::VectorXd* a_prev,
                  double* na_prev) {
  *a_prev = Eigen::VectorXd::Zero(traj.da());
  int count = 0;
  for (int i = 0; i < traj.n(); ++i) {
    if (traj.times[i] >= cutoff - kTimeEps) break;
    if (traj.a_mask[i]) {
      *a_prev = traj.a.row(i).transpose();
      ++count;
    }
  }
  *na_prev = static_cast<double>(count) / traj.tau;
}

Eigen::VectorXd decode_plan(const ModelBundle& bundle,
                            const Trajectory& norm_traj, double cutoff,
                            const InterventionPlan& plan,
                            const Eigen::VectorXd& z_enc) {
  if (std::abs(plan.start - cutoff) > kTimeEps)
    throw std::invalid_argument("plan does not start at the cutoff");
  const double horizon = plan.horizon - plan.start;
  if (horizon <= 0.0) throw std::invalid_argument("empty plan horizon");
  Eigen::VectorXd a_prev;
  double na_prev = 0.0;
  cutoff_state(norm_traj, cutoff, &a_prev, &na_prev);
  const ControlPath plan_path =
      build_plan_path(plan, horizon, norm_traj.tau, bundle.config.grid_step,
                      a_prev, na_prev);
  const Eigen::VectorXd a_end =
      plan.jumps() > 0 ? plan.values.row(plan.jumps() - 1).transpose() : a_prev;
  return bundle.dec.predict(z_enc, plan_path, a_end);
}

std::string format_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

Eigen::VectorXd predict_capo(const ModelBundle& bundle, const Trajectory& traj,
                             double cutoff, const InterventionPlan& plan) {
  const Trajectory norm_traj =
      normalize_dataset({traj}, bundle.norm).front();
  const ControlPath prefix = build_control_path(
      norm_traj, cutoff, bundle.config.grid_step, PathKind::Full);
  const Eigen::VectorXd z_enc = bundle.enc.encode(prefix);
  const Eigen::VectorXd pred_norm =
      decode_plan(bundle, norm_traj, cutoff, plan, z_enc);
  return pred_norm.cwiseProduct(bundle.norm.y_std) + bundle.norm.y_mean;
}

double evaluate_records(const ModelBundle& bundle,
                        const std::vector<Trajectory>& test_raw,
                        const std::vector<EvalRecord>& records,
                        std::vector<PairPrediction>* pairs) {
  if (records.empty()) throw std::invalid_argument("no records");
  const std::vector<Trajectory> test = normalize_dataset(test_raw, bundle.norm);
  std::map<std::pair<int, double>, Eigen::VectorXd> latents;
  double sq = 0.0;
  for (const EvalRecord& rec : records) {
    const Trajectory& tr = test.at(static_cast<std::size_t>(rec.subject));
    const auto key = std::make_pair(rec.subject, rec.cutoff);
    auto it = latents.find(key);
    if (it == latents.end()) {
      const ControlPath prefix = build_control_path(
          tr, rec.cutoff, bundle.config.grid_step, PathKind::Full);
      it = latents.emplace(key, bundle.enc.encode(prefix)).first;
    }
    const Eigen::VectorXd pred_norm =
        decode_plan(bundle, tr, rec.cutoff, rec.plan, it->second);
    const double z_hat = pred_norm(0);
    const double z_true =
        (rec.ground_truth - bundle.norm.y_mean(0)) / bundle.norm.y_std(0);
    sq += (z_hat - z_true) * (z_hat - z_true);
    if (pairs != nullptr)
      pairs->push_back({rec.subject, rec.cutoff,
                        z_hat * bundle.norm.y_std(0) + bundle.norm.y_mean(0),
                        rec.ground_truth});
  }
  return std::sqrt(sq / static_cast<double>(records.size()));
}

void save_records(const std::vector<EvalRecord>& records,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const EvalRecord& r : records) {
    nlohmann::json j;
    j["subject"] = r.subject;
    j["cutoff"] = r.cutoff;
    j["start"] = r.plan.start;
    j["horizon"] = r.plan.horizon;
    j["jump_times"] = r.plan.jump_times;
    nlohmann::json vals = nlohmann::json::array();
    for (int i = 0; i < r.plan.values.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(r.plan.values.cols()));
      for (int c = 0; c < r.plan.values.cols(); ++c)
        row[static_cast<std::size_t>(c)] = r.plan.values(i, c);
      vals.push_back(row);
    }
    j["values"] = vals;
    j["ground_truth"] = r.ground_truth;
    out << j.dump() << "\n";
  }
}

std::vector<EvalRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    EvalRecord r;
    r.subject = j.at("subject").get<int>();
    r.cutoff = j.at("cutoff").get<double>();
    r.plan.start = j.at("start").get<double>();
    r.plan.horizon = j.at("horizon").get<double>();
    r.plan.jump_times = j.at("jump_times").get<std::vector<double>>();
    const auto& vals = j.at("values");
    const int rows = static_cast<int>(vals.size());
    const int cols = rows > 0 ? static_cast<int>(vals.at(0).size()) : 0;
    r.plan.values.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int c = 0; c < cols; ++c)
        r.plan.values(i, c) = vals.at(i).at(c).get<double>();
    r.ground_truth = j.at("ground_truth").get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

void save_pairs(const std::vector<PairPrediction>& pairs,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (const PairPrediction& p : pairs) {
    nlohmann::json j;
    j["subject"] = p.subject;
    j["cutoff"] = p.cutoff;
    j["y_hat"] = p.y_hat;
    j["y_true"] = p.y_true;
    out << j.dump() << "\n";
  }
}

std::vector<EvalRecord> make_eval_records(const SimResult& test,
                                          const SimConfig& sim_cfg,
                                          double cutoff, double horizon,
                                          int plans_per_prefix, Rng& rng) {
  std::vector<EvalRecord> records;
  for (std::size_t i = 0; i < test.trajectories.size(); ++i) {
    const Trajectory& tr = test.trajectories[i];
    const std::vector<InterventionPlan> plans = sample_test_interventions(
        cutoff, horizon, tr.tau, tr.da(), plans_per_prefix, rng);
    for (const InterventionPlan& plan : plans) {
      EvalRecord rec;
      rec.subject = static_cast<int>(i);
      rec.cutoff = cutoff;
      rec.plan = plan;
      rec.ground_truth =
          ground_truth_capo(test.true_volumes[i], HistoryPrefix{&tr, cutoff},
                            plan, test.params[i], sim_cfg);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "variant,gamma,omega,horizon,seed,rmse,n_pairs\n";
  for (const SweepRow& r : rows) {
    out << r.variant << "," << format_num(r.gamma) << "," << format_num(r.omega)
        << "," << format_num(r.horizon) << "," << r.seed << ","
        << (r.failed ? "failed" : format_num(r.rmse)) << "," << r.n_pairs
        << "\n";
  }
}

std::vector<SweepRow> sweep(const SweepConfig& cfg) {
  std::vector<SweepRow> rows;
  for (double gamma : cfg.gammas) {
    for (std::uint64_t seed : cfg.seeds) {
      SimConfig strain = cfg.sim;
      strain.gamma = gamma;
      strain.omega = cfg.omega;
      strain.n_subjects = cfg.n_train;
      strain.seed = mix64(seed + 11);
      SimConfig stest = strain;
      stest.n_subjects = cfg.n_test;
      stest.seed = mix64(seed + 22);
      const SimResult train_sim = simulate(strain);
      const SimResult test_sim = simulate(stest);

      TrainConfig tc = cfg.base;
      tc.seed = seed;
      ModelBundle shared = make_bundle(train_sim.trajectories, tc);
      const std::vector<Trajectory> data =
          normalize_dataset(train_sim.trajectories, shared.norm);

      std::vector<ControlPath> treat_paths, full_paths;
      for (const auto& tr : data) {
        treat_paths.push_back(build_control_path(tr, tr.tau, tc.grid_step,
                                                 PathKind::TreatmentOnly));
        full_paths.push_back(
            build_control_path(tr, tr.tau, tc.grid_step, PathKind::Full));
      }
      const int n = static_cast<int>(data.size());
      const int n_val = static_cast<int>(std::floor(tc.val_fraction * n));
      std::vector<int> train_idx, val_idx;
      for (int i = 0; i < n - n_val; ++i) train_idx.push_back(i);
      for (int i = n - n_val; i < n; ++i) val_idx.push_back(i);

      Rng master(seed);
      std::vector<StageMetric> metrics;
      Rng rng_s = master.split(2);
      Rng rng_w = master.split(3);
      Rng rng_e = master.split(4);
      train_sw(shared.s, data, treat_paths, train_idx, val_idx, tc, rng_s,
               metrics, "stability");
      train_sw(shared.w, data, full_paths, train_idx, val_idx, tc, rng_w,
               metrics, "weight");
      train_encoder(shared.enc, data, full_paths, train_idx, val_idx, tc,
                    rng_e, metrics);

      std::size_t h_index = 0;
      for (double horizon : cfg.horizons) {
        tc.horizon = horizon;
        std::vector<Instance> instances;
        std::vector<const Trajectory*> traj_of;
        std::vector<int> inst_train, inst_val;
        for (int i = 0; i < n; ++i) {
          const bool is_train = i < n - n_val;
          for (auto& inst :
               slice_instances(data[static_cast<std::size_t>(i)], {horizon})) {
            (is_train ? inst_train : inst_val)
                .push_back(static_cast<int>(instances.size()));
            traj_of.push_back(&data[static_cast<std::size_t>(i)]);
            instances.push_back(std::move(inst));
          }
        }
        std::vector<DecoderInstance> dec_insts;
        dec_insts.reserve(instances.size());
        for (const auto& inst : instances)
          dec_insts.push_back(make_decoder_instance(shared.enc, inst, tc));

        Rng rec_rng = master.split(100 + h_index);
        const std::vector<EvalRecord> records =
            make_eval_records(test_sim, stest, cfg.eval_cutoff, horizon,
                              cfg.plans_per_prefix, rec_rng);
        ++h_index;

        for (const std::string& variant : cfg.variants) {
          SweepRow row;
          row.variant = variant;
          row.gamma = gamma;
          row.omega = cfg.omega;
          row.horizon = horizon;
          row.seed = seed;
          try {
            tc.variant = variant;
            const WeightCache cache =
                cache_weights(traj_of, instances, shared.s, shared.w, variant,
                              tc);
            ModelBundle bundle = shared;
            bundle.config = tc;
            Rng rng_d = master.split(5);
            std::vector<StageMetric> dm;
            train_decoder(bundle.dec, dec_insts, cache.weights, inst_train,
                          inst_val, tc, rng_d, dm);
            std::vector<PairPrediction> pairs;
            row.rmse = evaluate_records(bundle, test_sim.trajectories, records,
                                        &pairs);
            row.n_pairs = static_cast<long>(pairs.size());
            if (!cfg.out_dir.empty())
              save_pairs(pairs, cfg.out_dir + "/pairs_" + variant + "_g" +
                                    format_num(gamma) + "_h" +
                                    format_num(horizon) + "_s" +
                                    std::to_string(seed) + ".jsonl");
          } catch (const std::exception&) {
            row.failed = true;
          }
          rows.push_back(std::move(row));
        }
      }
    }
  }
  if (!cfg.out_dir.empty()) write_sweep_csv(rows, cfg.out_dir + "/report.csv");
  return rows;
}

}  // namespace scipnet
