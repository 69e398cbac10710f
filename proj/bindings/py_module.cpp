#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scipnet/eval.hpp"
#include "scipnet/simulator.hpp"
#include "scipnet/training.hpp"
#include "scipnet/weights.hpp"

namespace py = pybind11;
using namespace scipnet;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Continuous-time treatment-effect estimation core";

  m.def("volume_to_diameter", &volume_to_diameter, py::arg("volume"));
  m.def("diameter_to_volume", &diameter_to_volume, py::arg("diameter"));
  m.def(
      "step_tumor",
      [](double volume, double chemo, double radio, double rho, double alpha_r,
         double alpha_c, double eps) {
        PatientParams p;
        p.rho = rho;
        p.alpha_r = alpha_r;
        p.beta_r = 10.0 * alpha_r;
        p.alpha_c = alpha_c;
        return step_tumor(volume, chemo, radio, p, eps);
      },
      py::arg("volume"), py::arg("chemo"), py::arg("radio"), py::arg("rho"),
      py::arg("alpha_r"), py::arg("alpha_c"), py::arg("eps") = 0.0);
  m.def(
      "treatment_policy",
      [](const std::vector<double>& volumes, double gamma) {
        return treatment_policy(volumes, gamma, 13.0, 15.0);
      },
      py::arg("volumes"), py::arg("gamma"));

  m.def(
      "simulate_to_file",
      [](const std::string& path, int n_subjects, double gamma, double omega,
         std::uint64_t seed, double decision_rate) {
        SimConfig sc;
        sc.n_subjects = n_subjects;
        sc.gamma = gamma;
        sc.omega = omega;
        sc.seed = seed;
        sc.decision_rate = decision_rate;
        const SimResult result = simulate(sc);
        save_trajectories(result.trajectories, path);
        return static_cast<int>(result.trajectories.size());
      },
      py::arg("path"), py::arg("n_subjects"), py::arg("gamma") = 0.0,
      py::arg("omega") = 0.0, py::arg("seed") = 0,
      py::arg("decision_rate") = 1.0);

  m.def(
      "make_records_to_file",
      [](const std::string& path, int n_subjects, double gamma, double omega,
         std::uint64_t seed, double cutoff, double horizon, int plans) {
        SimConfig sc;
        sc.n_subjects = n_subjects;
        sc.gamma = gamma;
        sc.omega = omega;
        sc.seed = seed;
        const SimResult result = simulate(sc);
        Rng rng(mix64(seed + 77));
        const auto records =
            make_eval_records(result, sc, cutoff, horizon, plans, rng);
        save_records(records, path);
        return static_cast<int>(records.size());
      },
      py::arg("path"), py::arg("n_subjects"), py::arg("gamma") = 0.0,
      py::arg("omega") = 0.0, py::arg("seed") = 0, py::arg("cutoff") = 15.0,
      py::arg("horizon") = 1.0, py::arg("plans") = 5);

  m.def(
      "train_to_dir",
      [](const std::string& data_path, const std::string& out_dir,
         const std::string& variant, double horizon, std::uint64_t seed,
         int epochs, double lr) {
        TrainConfig tc;
        tc.variant = variant;
        tc.horizon = horizon;
        tc.seed = seed;
        tc.epochs = epochs;
        tc.lr = lr;
        const std::vector<Trajectory> data = load_trajectories(data_path);
        PipelineResult result = run_pipeline(data, tc);
        result.bundle.save(out_dir);
        write_metrics_csv(out_dir + "/metrics.csv", result.metrics);
        return result.metrics.empty() ? 0.0 : result.metrics.back().loss;
      },
      py::arg("data_path"), py::arg("out_dir"), py::arg("variant") = "scip",
      py::arg("horizon") = 1.0, py::arg("seed") = 0, py::arg("epochs") = 2,
      py::arg("lr") = 0.001);

  m.def(
      "evaluate_files",
      [](const std::string& bundle_dir, const std::string& data_path,
         const std::string& records_path) {
        const ModelBundle bundle = ModelBundle::load(bundle_dir);
        const std::vector<Trajectory> data = load_trajectories(data_path);
        const std::vector<EvalRecord> records = load_records(records_path);
        return evaluate_records(bundle, data, records);
      },
      py::arg("bundle_dir"), py::arg("data_path"), py::arg("records_path"));

  m.def(
      "predict_capo_file",
      [](const std::string& bundle_dir, const std::string& data_path,
         int subject, double cutoff, const std::vector<double>& jump_times,
         const std::vector<std::vector<double>>& values) {
        const ModelBundle bundle = ModelBundle::load(bundle_dir);
        const std::vector<Trajectory> data = load_trajectories(data_path);
        InterventionPlan plan;
        plan.start = cutoff;
        plan.jump_times = jump_times;
        const int rows = static_cast<int>(values.size());
        const int cols = rows > 0 ? static_cast<int>(values[0].size()) : 0;
        plan.values.resize(rows, cols);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j)
            plan.values(i, j) = values[static_cast<std::size_t>(i)]
                                      [static_cast<std::size_t>(j)];
        plan.horizon = jump_times.empty() ? cutoff + 1.0 : jump_times.back();
        const Eigen::VectorXd y = predict_capo(
            bundle, data.at(static_cast<std::size_t>(subject)), cutoff, plan);
        return y(0);
      },
      py::arg("bundle_dir"), py::arg("data_path"), py::arg("subject"),
      py::arg("cutoff"), py::arg("jump_times"), py::arg("values"));

  m.def(
      "stabilized_weight_demo",
      [](double lam, double pi, double cutoff,
         const std::vector<double>& jump_times) {
        FunctionModel model([lam](double) { return lam; },
                            [pi](double, const Eigen::VectorXd&) { return pi; });
        InterventionPlan plan;
        plan.start = cutoff;
        plan.jump_times = jump_times;
        plan.values.setOnes(static_cast<int>(jump_times.size()), 1);
        plan.horizon = jump_times.empty() ? cutoff : jump_times.back();
        const WeightTrace w = unstabilized_weight(model, cutoff, plan, 1e-3);
        const WeightTrace xi = scaling_factor(model, cutoff, plan, 1e-3);
        return py::make_tuple(w.product_unstabilized,
                              stabilized_weight(w, xi));
      },
      py::arg("intensity"), py::arg("propensity"), py::arg("cutoff"),
      py::arg("jump_times"));
}
