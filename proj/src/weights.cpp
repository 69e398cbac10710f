#include "scipnet/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace scipnet {

namespace {
constexpr double kTimeEps = 1e-12;
}

double integrated_intensity(const IntensityPropensityModel& model, double t0,
                            double t1, double substep) {
  if (t1 < t0) throw std::invalid_argument("t1 must be >= t0");
  if (substep <= 0.0) throw std::invalid_argument("substep must be positive");
  double sum = 0.0;
  double s = t0;
  while (s < t1 - kTimeEps) {
    const double h = std::min(substep, t1 - s);
    sum += model.intensity(s) * h;
    s += h;
  }
  return sum;
}

WeightTrace unstabilized_weight(const IntensityPropensityModel& model,
                                double cutoff, const InterventionPlan& plan,
                                double substep) {
  WeightTrace trace;
  trace.jump_times = plan.jump_times;
  double prev = cutoff;
  for (int j = 0; j < plan.jumps(); ++j) {
    const double tj = plan.jump_times[j];
    const double integral = integrated_intensity(model, prev, tj, substep);
    double lam = model.intensity(tj);
    double pi = model.propensity(tj, plan.values.row(j));
    if (lam < kIntensityFloor) {
      lam = kIntensityFloor;
      trace.floored = true;
    }
    if (pi < kPropensityFloor) {
      pi = kPropensityFloor;
      trace.floored = true;
    }
    const double factor = std::exp(integral) / (lam * pi);
    trace.w_factors.push_back(factor);
    trace.product_unstabilized *= factor;
    prev = tj;
  }
  return trace;
}

WeightTrace scaling_factor(const IntensityPropensityModel& marginal_model,
                           double cutoff, const InterventionPlan& plan,
                           double substep) {
  WeightTrace trace;
  trace.jump_times = plan.jump_times;
  double product = 1.0;
  double prev = cutoff;
  for (int j = 0; j < plan.jumps(); ++j) {
    const double tj = plan.jump_times[j];
    const double integral =
        integrated_intensity(marginal_model, prev, tj, substep);
    double lam = marginal_model.intensity(tj);
    double pi = marginal_model.propensity(tj, plan.values.row(j));
    if (lam < kIntensityFloor) {
      lam = kIntensityFloor;
      trace.floored = true;
    }
    if (pi < kPropensityFloor) {
      pi = kPropensityFloor;
      trace.floored = true;
    }
    const double factor = lam * pi / std::exp(integral);
    trace.xi_factors.push_back(factor);
    product *= factor;
    prev = tj;
  }
  trace.product_stabilized = product;  // holds prod Xi until combined with W
  return trace;
}

double stabilized_weight(const WeightTrace& w_trace,
                         const WeightTrace& xi_trace) {
  if (w_trace.jump_times.size() != xi_trace.jump_times.size())
    throw std::invalid_argument("mismatched jump times");
  for (std::size_t j = 0; j < w_trace.jump_times.size(); ++j) {
    if (std::abs(w_trace.jump_times[j] - xi_trace.jump_times[j]) > 1e-9)
      throw std::invalid_argument("mismatched jump times");
  }
  double product = 1.0;
  for (std::size_t j = 0; j < w_trace.w_factors.size(); ++j)
    product *= w_trace.w_factors[j] * xi_trace.xi_factors[j];
  return product;
}

std::vector<double> truncate_normalize(const std::vector<double>& weights,
                                       double lo_pct, double hi_pct) {
  if (weights.empty()) throw std::invalid_argument("empty batch");
  std::vector<double> sorted = weights;
  std::sort(sorted.begin(), sorted.end());
  const auto percentile = [&sorted](double p) {
    const double rank = p / 100.0 * (static_cast<double>(sorted.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = rank - std::floor(rank);
    return sorted[lo] + w * (sorted[hi] - sorted[lo]);
  };
  const double lo = percentile(lo_pct);
  const double hi = percentile(hi_pct);
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    out[i] = std::clamp(weights[i], lo, hi);
  const double mean =
      std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  if (mean > 0.0)
    for (double& w : out) w /= mean;
  return out;
}

double product_integral_oracle(const IntensityPropensityModel& model, double t0,
                               double t1, const InterventionPlan& plan,
                               double h) {
  if (h <= 0.0) throw std::invalid_argument("h must be positive");
  double product = 1.0;
  for (int j = 0; j < plan.jumps(); ++j) {
    const double tj = plan.jump_times[j];
    product /= model.intensity(tj) * model.propensity(tj, plan.values.row(j));
  }
  const long bins = static_cast<long>(std::ceil((t1 - t0) / h - kTimeEps));
  for (long k = 0; k < bins; ++k) {
    const double lo = t0 + static_cast<double>(k) * h;
    const double hi = std::min(lo + h, t1);
    bool has_jump = false;
    for (int j = 0; j < plan.jumps(); ++j) {
      if (plan.jump_times[j] >= lo - kTimeEps &&
          plan.jump_times[j] < hi - kTimeEps) {
        has_jump = true;
        break;
      }
    }
    if (!has_jump) product /= 1.0 - model.intensity(lo) * (hi - lo);
  }
  return product;
}

}  // namespace scipnet
