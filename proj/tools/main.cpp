#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scipnet/config.hpp"
#include "scipnet/eval.hpp"
#include "scipnet/simulator.hpp"
#include "scipnet/training.hpp"

namespace {

using namespace scipnet;

int max_threads() {
  const char* env = std::getenv("SCIPNET_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

void rename_into_place(const std::string& tmp, const std::string& final_path) {
  std::filesystem::rename(tmp, final_path);
}

SimConfig read_sim_config(const Config& cfg) {
  SimConfig sc;
  sc.n_subjects = cfg.get_int("simulate", "n_subjects", sc.n_subjects);
  sc.tau = cfg.get_double("simulate", "tau", sc.tau);
  sc.gamma = cfg.get_double("simulate", "gamma", sc.gamma);
  sc.omega = cfg.get_double("simulate", "omega", sc.omega);
  sc.d_max = cfg.get_double("simulate", "d_max", sc.d_max);
  sc.window = cfg.get_double("simulate", "window", sc.window);
  sc.chemo_dose = cfg.get_double("simulate", "chemo_dose", sc.chemo_dose);
  sc.radio_dose = cfg.get_double("simulate", "radio_dose", sc.radio_dose);
  sc.noise_std = cfg.get_double("simulate", "noise_std", sc.noise_std);
  sc.decision_rate =
      cfg.get_double("simulate", "decision_rate", sc.decision_rate);
  sc.y0_min = cfg.get_double("simulate", "y0_min", sc.y0_min);
  sc.y0_max = cfg.get_double("simulate", "y0_max", sc.y0_max);
  if (sc.gamma < 0.0) throw std::invalid_argument("simulate.gamma must be >= 0");
  if (sc.noise_std < 0.0)
    throw std::invalid_argument("simulate.noise_std must be >= 0");
  return sc;
}

TrainConfig read_train_config(const Config& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.get_int("train", "epochs", tc.epochs);
  tc.lr = cfg.get_double("train", "lr", tc.lr);
  tc.batch_sw = cfg.get_int("train", "batch_sw", tc.batch_sw);
  tc.batch_decoder = cfg.get_int("train", "batch_decoder", tc.batch_decoder);
  tc.clip_norm = cfg.get_double("train", "clip_norm", tc.clip_norm);
  tc.d_z = cfg.get_int("train", "d_z", tc.d_z);
  tc.d_hidden = cfg.get_int("train", "d_hidden", tc.d_hidden);
  tc.dropout = cfg.get_double("train", "dropout", tc.dropout);
  tc.grid_step = cfg.get_double("train", "grid_step", tc.grid_step);
  tc.val_fraction = cfg.get_double("train", "val_fraction", tc.val_fraction);
  if (tc.epochs < 0) throw std::invalid_argument("train.epochs must be >= 0");
  if (tc.lr <= 0.0) throw std::invalid_argument("train.lr must be positive");
  if (tc.dropout < 0.0 || tc.dropout >= 1.0)
    throw std::invalid_argument("train.dropout must be in [0, 1)");
  return tc;
}

Config load_config_or_empty(const std::string& path) {
  return path.empty() ? Config::from_string("") : Config::load(path);
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config_or_empty(config_path);
  SimConfig sc = read_sim_config(cfg);
  const std::vector<double> horizons =
      cfg.get_doubles("simulate", "horizons", {1.0, 2.0, 3.0});
  const double eval_cutoff =
      cfg.get_double("simulate", "eval_cutoff", 15.0);
  const int plans = cfg.get_int("simulate", "plans_per_prefix", 50);
  cfg.finish();
  sc.seed = seed;

  std::filesystem::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.config = cfg.resolved();
  manifest.seed = seed;
  if (!config_path.empty())
    manifest.input_digests[config_path] = digest_hex(file_digest(config_path));
  manifest.save(out_dir + "/manifest.json");

  const SimResult result = simulate(sc);
  const std::string data_path = out_dir + "/data.jsonl";
  save_trajectories(result.trajectories, data_path + ".tmp");
  rename_into_place(data_path + ".tmp", data_path);
  manifest.output_digests[data_path] = digest_hex(file_digest(data_path));

  Rng rec_master(mix64(seed + 77));
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    Rng rec_rng = rec_master.split(h);
    const std::vector<EvalRecord> records =
        make_eval_records(result, sc, eval_cutoff, horizons[h], plans, rec_rng);
    char name[64];
    std::snprintf(name, sizeof(name), "/records_h%g.jsonl", horizons[h]);
    const std::string rec_path = out_dir + name;
    save_records(records, rec_path + ".tmp");
    rename_into_place(rec_path + ".tmp", rec_path);
    manifest.output_digests[rec_path] = digest_hex(file_digest(rec_path));
  }

  manifest.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  manifest.save(out_dir + "/manifest.json");
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& variant, double horizon, std::uint64_t seed,
              const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config_or_empty(config_path);
  TrainConfig tc = read_train_config(cfg);
  cfg.finish();
  tc.variant = variant;
  tc.horizon = horizon;
  tc.seed = seed;
  if (variant != "scip" && variant != "cip" && variant != "unweighted")
    throw std::invalid_argument("unknown variant " + variant);
  if (horizon <= 0.0) throw std::invalid_argument("horizon must be positive");

  std::filesystem::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "train";
  manifest.config = cfg.resolved();
  manifest.seed = seed;
  manifest.input_digests[data_path] = digest_hex(file_digest(data_path));
  if (!config_path.empty())
    manifest.input_digests[config_path] = digest_hex(file_digest(config_path));
  manifest.save(out_dir + "/manifest.json");

  const std::vector<Trajectory> data = load_trajectories(data_path);
  PipelineResult result = run_pipeline(data, tc);
  result.bundle.save(out_dir);
  write_metrics_csv(out_dir + "/metrics.csv", result.metrics);
  if (result.cache.floor_warning)
    std::cerr << "warning: estimate floors engaged on more than 20% of weight "
                 "factors\n";

  for (const std::string& f : {"/bundle.json", "/params.json", "/params.bin",
                               "/metrics.csv"})
    manifest.output_digests[out_dir + f] =
        digest_hex(file_digest(out_dir + f));
  manifest.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  manifest.save(out_dir + "/manifest.json");
  return 0;
}

int cmd_evaluate(const std::string& bundle_dir, const std::string& data_path,
                 const std::string& records_path, const std::string& out_dir,
                 double gamma, double omega) {
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.input_digests[data_path] = digest_hex(file_digest(data_path));
  manifest.input_digests[records_path] =
      digest_hex(file_digest(records_path));
  manifest.save(out_dir + "/manifest.json");

  ModelBundle bundle = ModelBundle::load(bundle_dir);
  manifest.seed = bundle.config.seed;
  const std::vector<Trajectory> data = load_trajectories(data_path);
  const std::vector<EvalRecord> records = load_records(records_path);
  std::vector<PairPrediction> pairs;
  const double rmse = evaluate_records(bundle, data, records, &pairs);

  SweepRow row;
  row.variant = bundle.config.variant;
  row.gamma = gamma;
  row.omega = omega;
  row.horizon = bundle.config.horizon;
  row.seed = bundle.config.seed;
  row.rmse = rmse;
  row.n_pairs = static_cast<long>(pairs.size());
  write_sweep_csv({row}, out_dir + "/report.csv");
  save_pairs(pairs, out_dir + "/pairs.jsonl");

  manifest.output_digests[out_dir + "/report.csv"] =
      digest_hex(file_digest(out_dir + "/report.csv"));
  manifest.output_digests[out_dir + "/pairs.jsonl"] =
      digest_hex(file_digest(out_dir + "/pairs.jsonl"));
  manifest.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  manifest.save(out_dir + "/manifest.json");
  std::cout << "rmse " << rmse << " over " << pairs.size() << " pairs\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config_or_empty(config_path);
  SweepConfig sw;
  sw.sim = read_sim_config(cfg);
  sw.base = read_train_config(cfg);
  sw.gammas = cfg.get_doubles("sweep", "gammas", {4.0, 8.0});
  sw.horizons = cfg.get_doubles("sweep", "horizons", {1.0, 2.0, 3.0});
  sw.seeds = cfg.get_u64s("sweep", "seeds", {1, 2, 3});
  sw.variants =
      cfg.get_strings("sweep", "variants", {"scip", "cip", "unweighted"});
  sw.n_train = cfg.get_int("sweep", "n_train", sw.n_train);
  sw.n_test = cfg.get_int("sweep", "n_test", sw.n_test);
  sw.omega = cfg.get_double("sweep", "omega", sw.omega);
  sw.plans_per_prefix =
      cfg.get_int("sweep", "plans_per_prefix", sw.plans_per_prefix);
  sw.eval_cutoff = cfg.get_double("sweep", "eval_cutoff", sw.eval_cutoff);
  sw.base.epochs = cfg.get_int("sweep", "epochs", sw.base.epochs);
  cfg.finish();
  for (const std::string& v : sw.variants)
    if (v != "scip" && v != "cip" && v != "unweighted")
      throw std::invalid_argument("unknown variant " + v);
  sw.out_dir = out_dir;

  std::filesystem::create_directories(out_dir);
  RunManifest manifest;
  manifest.command = "sweep";
  manifest.config = cfg.resolved();
  if (!config_path.empty())
    manifest.input_digests[config_path] = digest_hex(file_digest(config_path));
  manifest.save(out_dir + "/manifest.json");

  const std::vector<SweepRow> rows = sweep(sw);
  int failed = 0;
  for (const auto& r : rows) failed += r.failed ? 1 : 0;
  manifest.output_digests[out_dir + "/report.csv"] =
      digest_hex(file_digest(out_dir + "/report.csv"));
  manifest.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  manifest.save(out_dir + "/manifest.json");
  std::cout << rows.size() << " cells, " << failed << " failed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time treatment-effect estimation toolkit"};
  app.require_subcommand(1);
  (void)max_threads();  // worker cap honored once parallel fan-out exists

  std::string config_path, out_dir, data_path, records_path, bundle_dir,
      variant = "scip";
  double horizon = 1.0, gamma = 0.0, omega = 0.0;
  std::uint64_t seed = 0;

  auto* sim = app.add_subcommand("simulate",
                                 "Generate a confounded tumor-growth cohort "
                                 "with ground-truth evaluation records");
  sim->add_option("--config", config_path, "Config file ([simulate] section)");
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--seed", seed, "Master seed");

  auto* train = app.add_subcommand(
      "train", "Run the staged training pipeline on a dataset");
  train->add_option("--data", data_path, "Training dataset (JSON lines)")
      ->required();
  train->add_option("--config", config_path, "Config file ([train] section)");
  train->add_option("--variant", variant, "scip | cip | unweighted");
  train->add_option("--horizon", horizon, "Prediction horizon in days");
  train->add_option("--seed", seed, "Master seed");
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Score a trained bundle against ground-truth records");
  eval_cmd->add_option("--bundle", bundle_dir, "Trained bundle directory")
      ->required();
  eval_cmd->add_option("--data", data_path, "Test dataset (JSON lines)")
      ->required();
  eval_cmd->add_option("--records", records_path, "Evaluation records")
      ->required();
  eval_cmd->add_option("--out", out_dir, "Output directory")->required();
  eval_cmd->add_option("--gamma", gamma, "Label for the report row");
  eval_cmd->add_option("--omega", omega, "Label for the report row");

  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Factorial gamma x horizon x seed x variant experiment");
  sweep_cmd->add_option("--config", config_path,
                        "Config file ([simulate]/[train]/[sweep] sections)");
  sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed);
    if (train->parsed())
      return cmd_train(data_path, config_path, variant, horizon, seed, out_dir);
    if (eval_cmd->parsed())
      return cmd_evaluate(bundle_dir, data_path, records_path, out_dir, gamma,
                          omega);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, out_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
