#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfbo/cost.hpp"
#include "mfbo/optim.hpp"

namespace mfbo {

/// A multi-fidelity objective to maximize: evaluate(m, x) for m in 1..M,
/// higher m more accurate and more expensive. Optimum metadata is present for
/// the synthetic benchmarks so regret can be computed.
struct BlackBoxTask {
  std::string name;
  int fidelities = 0;
  BoxDomain domain;
  CostModel costs;
  std::function<double(int, const Eigen::VectorXd&)> evaluate;
  std::optional<double> optimum_value;
  std::vector<Eigen::VectorXd> optimum_points;
};

/// Throws unless fidelity count, domain, costs (strictly increasing in m),
/// and the evaluator are all consistent.
void validate_task(const BlackBoxTask& task);

/// Two-dimensional benchmark on [-5,10] x [0,15] with three fidelities built
/// from a negated Branin surface composed with shifted, scaled copies of
/// itself. Global maximum -0.3979.
double branin_mf(int fidelity, const Eigen::VectorXd& x);

/// Four-dimensional benchmark on [0,1]^4 with two fidelities; x_1 is floored
/// at 1e-6 to guard the x_4/x_1^2 term on the boundary. Global maximum
/// 25.5893 at (1,1,1,1).
double park1_mf(int fidelity, const Eigen::VectorXd& x);

/// Two-dimensional benchmark on [-10,10]^2 with three fidelities derived from
/// a negated Levy surface. Global maximum 0 at (1,1).
double levy_mf(int fidelity, const Eigen::VectorXd& x);

/// Task registry: name in {branin, park1, levy}. Costs are (1,10,100) for the
/// three-fidelity tasks and (1,10) for park1.
BlackBoxTask make_task(const std::string& name);

}  // namespace mfbo
