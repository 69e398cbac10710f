#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "scipnet/trajectory.hpp"

namespace scipnet {

inline constexpr double kIntensityFloor = 1e-3;  // per day
inline constexpr double kPropensityFloor = 1e-3;

// Treatment intensity / propensity estimator evaluated along one instance's
// history. `intensity` is a rate per day; `propensity` is the probability of
// the given treatment configuration at a decision time.
struct IntensityPropensityModel {
  virtual ~IntensityPropensityModel() = default;
  virtual double intensity(double s) const = 0;
  virtual double propensity(double s, const Eigen::VectorXd& a) const = 0;
};

// Closure-backed model, convenient for analytic scenarios in tests.
struct FunctionModel final : IntensityPropensityModel {
  std::function<double(double)> lambda;
  std::function<double(double, const Eigen::VectorXd&)> pi;
  FunctionModel(std::function<double(double)> l,
                std::function<double(double, const Eigen::VectorXd&)> p)
      : lambda(std::move(l)), pi(std::move(p)) {}
  double intensity(double s) const override { return lambda(s); }
  double propensity(double s, const Eigen::VectorXd& a) const override {
    return pi(s, a);
  }
};

// Per-instance weight decomposition: ordered per-jump factors and products.
struct WeightTrace {
  std::vector<double> jump_times;
  std::vector<double> w_factors;   // unstabilized factors
  std::vector<double> xi_factors;  // scaling factors
  double product_unstabilized = 1.0;
  double product_stabilized = 1.0;
  bool floored = false;  // an intensity/propensity hit its floor
};

// Left-endpoint Euler quadrature of the intensity over [t0, t1).
double integrated_intensity(const IntensityPropensityModel& model, double t0,
                            double t1, double substep);

// Unstabilized inverse propensity weight: one factor per jump,
//   exp(int_{[t_{j-1}, t_j)} lambda ds) / (lambda(t_j) * pi(a_j | t_j)),
// conditioning on the full history (the model closes over it).
WeightTrace unstabilized_weight(const IntensityPropensityModel& model,
                                double cutoff, const InterventionPlan& plan,
                                double substep);

// Scaling factor: the same quantities under treatment-history-only
// conditioning, inverted:
//   lambda(t_j) * pi(a_j | t_j) / exp(int_{[t_{j-1}, t_j)} lambda ds).
WeightTrace scaling_factor(const IntensityPropensityModel& marginal_model,
                           double cutoff, const InterventionPlan& plan,
                           double substep);

// Stabilized weight: product over jumps of Xi_j * W_j. Throws on mismatched
// jump times.
double stabilized_weight(const WeightTrace& w_trace,
                         const WeightTrace& xi_trace);

// Clip to the [lo_pct, hi_pct] percentiles, then rescale to batch mean 1.
std::vector<double> truncate_normalize(const std::vector<double>& weights,
                                       double lo_pct = 1.0,
                                       double hi_pct = 99.0);

// Discretized product-integral reference: the finite product over bins of the
// likelihood-ratio form, converging first-order in h to the closed form.
// Used as an independent oracle in tests.
double product_integral_oracle(const IntensityPropensityModel& model, double t0,
                               double t1, const InterventionPlan& plan,
                               double h);

}  // namespace scipnet
