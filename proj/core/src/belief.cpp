#include "mfbo/belief.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfbo {

namespace {

// Conditional moments of layer `m` (1-based, m >= 2) at normalized input xs
// with previous-fidelity value f_prev, all in z-scored units.
std::pair<double, double> stage_moments(const MultiFidelityModel& model, int m,
                                        const Eigen::VectorXd& xs, double f_prev) {
  const FidelityLayer& layer = model.layer(m);
  Eigen::VectorXd input(xs.size() + 1);
  input.head(xs.size()) = xs;
  input[xs.size()] = f_prev;
  const BasisVector phi = forward_basis(layer.arch, layer.theta, input);
  const double u = layer.mu.dot(phi);
  const double gamma =
      (layer.chol.transpose().triangularView<Eigen::Upper>() * phi).squaredNorm() +
      variance_jitter;
  return {u, gamma};
}

// Quadrature propagation of one fidelity step: integrates the conditional
// moments of layer `m` against N(prev_mean, prev_var) and moment-matches.
std::pair<double, double> propagate_stage(const MultiFidelityModel& model, int m,
                                          const Eigen::VectorXd& xs, double prev_mean,
                                          double prev_var, const QuadratureRule& rule) {
  const double spread = std::sqrt(prev_var);
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double node = prev_mean + spread * rule.nodes[k];
    const auto [u, gamma] = stage_moments(model, m, xs, node);
    mean += rule.weights[k] * u;
    second += rule.weights[k] * (gamma + u * u);
  }
  double variance = second - mean * mean;
  if (!std::isfinite(mean) || !std::isfinite(variance)) {
    throw std::runtime_error("non-finite belief moments at fidelity " + std::to_string(m));
  }
  if (variance < variance_jitter) variance = variance_jitter;
  return {mean, variance};
}

void check_chain_args(const MultiFidelityModel& model, const Eigen::VectorXd& x, int fidelity) {
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.input_dim()));
  }
  if (fidelity < 1 || fidelity >= model.fidelities()) {
    throw std::invalid_argument("conditioning fidelity must lie in [1, " +
                                std::to_string(model.fidelities() - 1) + "]");
  }
}

}  // namespace

std::pair<double, double> conditional_gaussian(const FidelityLayer& layer,
                                               const Eigen::VectorXd& x, double f_prev) {
  if (x.size() + 1 != layer.input_dim()) {
    throw std::invalid_argument("layer expects input width " + std::to_string(layer.input_dim()) +
                                ", got " + std::to_string(x.size()) + "+1");
  }
  Eigen::VectorXd input(x.size() + 1);
  input.head(x.size()) = x;
  input[x.size()] = f_prev;
  const BasisVector phi = forward_basis(layer.arch, layer.theta, input);
  const double u = layer.mu.dot(phi);
  const double gamma =
      (layer.chol.transpose().triangularView<Eigen::Upper>() * phi).squaredNorm() +
      variance_jitter;
  return {u, gamma};
}

std::vector<GaussianBelief> output_posteriors_internal(const MultiFidelityModel& model,
                                                       const Eigen::VectorXd& x,
                                                       const QuadratureRule& rule,
                                                       int up_to_fidelity) {
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.input_dim()));
  }
  const int last = up_to_fidelity == 0 ? model.fidelities() : up_to_fidelity;
  if (last < 1 || last > model.fidelities()) {
    throw std::invalid_argument("fidelity bound out of range");
  }
  const Eigen::VectorXd xs = model.scale_input(x);
  std::vector<GaussianBelief> beliefs;
  beliefs.reserve(static_cast<std::size_t>(last));

  const FidelityLayer& first = model.layer(1);
  const BasisVector phi = forward_basis(first.arch, first.theta, xs);
  GaussianBelief belief;
  belief.alpha = first.mu.dot(phi);
  belief.eta =
      (first.chol.transpose().triangularView<Eigen::Upper>() * phi).squaredNorm() +
      variance_jitter;
  if (!std::isfinite(belief.alpha) || !std::isfinite(belief.eta)) {
    throw std::runtime_error("non-finite belief moments at fidelity 1");
  }
  beliefs.push_back(belief);

  for (int m = 2; m <= last; ++m) {
    const auto [mean, variance] =
        propagate_stage(model, m, xs, beliefs.back().alpha, beliefs.back().eta, rule);
    beliefs.push_back(GaussianBelief{mean, variance});
  }
  return beliefs;
}

std::vector<GaussianBelief> output_posteriors(const MultiFidelityModel& model,
                                              const Eigen::VectorXd& x,
                                              const QuadratureRule& rule) {
  std::vector<GaussianBelief> beliefs = output_posteriors_internal(model, x, rule);
  for (int m = 1; m <= model.fidelities(); ++m) {
    const OutputScaler& scaler = model.scaler(m);
    GaussianBelief& belief = beliefs[static_cast<std::size_t>(m - 1)];
    belief.alpha = scaler.to_external(belief.alpha);
    belief.eta *= scaler.stddev * scaler.stddev;
  }
  return beliefs;
}

std::vector<ConditionalBelief> conditional_chain_internal(const MultiFidelityModel& model,
                                                          const Eigen::VectorXd& x, int fidelity,
                                                          double f_m_internal,
                                                          const QuadratureRule& rule) {
  check_chain_args(model, x, fidelity);
  const Eigen::VectorXd xs = model.scale_input(x);
  std::vector<ConditionalBelief> chain;
  chain.reserve(static_cast<std::size_t>(model.fidelities() - fidelity));

  const auto [u, gamma] = stage_moments(model, fidelity + 1, xs, f_m_internal);
  if (!std::isfinite(u) || !std::isfinite(gamma)) {
    throw std::runtime_error("non-finite belief moments at fidelity " +
                             std::to_string(fidelity + 1));
  }
  chain.push_back(ConditionalBelief{u, gamma});

  for (int m = fidelity + 2; m <= model.fidelities(); ++m) {
    const auto [mean, variance] =
        propagate_stage(model, m, xs, chain.back().alpha_hat, chain.back().eta_hat, rule);
    chain.push_back(ConditionalBelief{mean, variance});
  }
  return chain;
}

std::vector<ConditionalBelief> conditional_posterior_chain(const MultiFidelityModel& model,
                                                           const Eigen::VectorXd& x, int fidelity,
                                                           double f_m_value,
                                                           const QuadratureRule& rule) {
  check_chain_args(model, x, fidelity);
  std::vector<ConditionalBelief> chain = conditional_chain_internal(
      model, x, fidelity, model.scaler(fidelity).to_internal(f_m_value), rule);
  for (int m = fidelity + 1; m <= model.fidelities(); ++m) {
    const OutputScaler& scaler = model.scaler(m);
    ConditionalBelief& belief = chain[static_cast<std::size_t>(m - fidelity - 1)];
    belief.alpha_hat = scaler.to_external(belief.alpha_hat);
    belief.eta_hat *= scaler.stddev * scaler.stddev;
  }
  return chain;
}

}  // namespace mfbo
