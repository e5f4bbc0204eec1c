#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace mfbo {

/// Objective callable: fills the gradient and returns the value.
using ObjectiveWithGrad = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 1000;
};

struct LbfgsConfig {
  int memory = 8;
  int max_iters = 100;
  double grad_tol = 1e-6;
  int restarts = 10;
};

/// Axis-aligned box; lower < upper per dimension.
struct BoxDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd width() const { return upper - lower; }
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  static BoxDomain unit(int dim);
};

void validate_domain(const BoxDomain& domain);

/// One ADAM step with bias correction, usable from custom training loops.
struct AdamState {
  explicit AdamState(Eigen::Index n, AdamConfig cfg = {});
  void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad);

  AdamConfig config;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long t = 0;
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

/// Runs cfg.max_epochs ADAM updates from `init`; returns the best evaluated
/// iterate. Throws std::runtime_error naming the epoch if the objective or
/// gradient turns non-finite.
OptimResult adam_minimize(const ObjectiveWithGrad& objective, const Eigen::VectorXd& init,
                          const AdamConfig& cfg);

/// Multi-start projected L-BFGS ascent over a box: cfg.restarts uniform
/// starts, backtracking Armijo line search, iterates clamped into the box.
/// Returns the best point found across all restarts and evaluations.
OptimResult lbfgs_maximize(const ObjectiveWithGrad& objective, const BoxDomain& domain,
                           const LbfgsConfig& cfg, std::uint64_t rng_seed);

/// Wraps a value-only objective with central finite differences, stepping
/// h_rel * (upper - lower) per coordinate.
ObjectiveWithGrad finite_difference_objective(const std::function<double(const Eigen::VectorXd&)>& f,
                                              const BoxDomain& domain, double h_rel = 1e-5);

}  // namespace mfbo
