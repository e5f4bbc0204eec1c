#pragma once

#include <cstddef>
#include <vector>

namespace mfbo {

/// Query cost per fidelity, lambda_1..lambda_M.
struct CostModel {
  std::vector<double> lambdas;

  int fidelities() const { return static_cast<int>(lambdas.size()); }
  double cost(int fidelity) const { return lambdas.at(static_cast<std::size_t>(fidelity - 1)); }
};

/// Throws unless the model has exactly `fidelities` strictly positive costs.
void validate_costs(const CostModel& costs, int fidelities);

}  // namespace mfbo
