#include "mfbo/quadrature.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace mfbo {

QuadratureRule gauss_hermite_rule(int order) {
  if (order < 1 || order > 100) {
    throw std::invalid_argument("quadrature order must be in [1, 100]");
  }
  QuadratureRule rule;
  rule.order = order;
  if (order == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }

  // Jacobi matrix of He_k: zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("Jacobi matrix eigendecomposition failed");
  }

  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int k = 0; k < order; ++k) {
    rule.nodes[k] = solver.eigenvalues()[k];
    const double first = solver.eigenvectors()(0, k);
    rule.weights[k] = first * first;  // total measure of N(0,1) is 1
  }

  // Symmetrize: eigenvalues come back sorted, so node k pairs with node
  // order-1-k. Enforces exact +-symmetry and an exact zero centre node.
  for (int k = 0; k < order / 2; ++k) {
    const int j = order - 1 - k;
    const double node = 0.5 * (rule.nodes[j] - rule.nodes[k]);
    rule.nodes[k] = -node;
    rule.nodes[j] = node;
    const double weight = 0.5 * (rule.weights[k] + rule.weights[j]);
    rule.weights[k] = weight;
    rule.weights[j] = weight;
  }
  if (order % 2 == 1) {
    rule.nodes[order / 2] = 0.0;
  }
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

double gaussian_expectation(const std::function<double(double)>& h, double mean, double var,
                            const QuadratureRule& rule) {
  if (var < 0.0) {
    throw std::invalid_argument("gaussian_expectation: negative variance");
  }
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (int k = 0; k < rule.order; ++k) {
    const double value = h(mean + sd * rule.nodes[k]);
    if (!std::isfinite(value)) {
      throw std::runtime_error("gaussian_expectation: integrand not finite at a node");
    }
    acc += rule.weights[k] * value;
  }
  return acc;
}

}  // namespace mfbo
