#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "mfbo/quadrature.hpp"
#include "mfbo/surrogate.hpp"

namespace mfbo {

/// Floor added to every propagated variance (z-scored units). Keeps the
/// chain strictly positive when a trained Cholesky factor underflows.
inline constexpr double variance_jitter = 1e-10;

/// Gaussian approximation of a fidelity output posterior.
struct GaussianBelief {
  double alpha = 0.0;  // posterior mean
  double eta = 0.0;    // posterior variance, > 0
};

/// Gaussian approximation of a higher-fidelity posterior conditioned on an
/// observed lower-fidelity output value.
struct ConditionalBelief {
  double alpha_hat = 0.0;
  double eta_hat = 0.0;
};

/// Conditional mean and variance of one layer's output given its full input:
/// u = mu^T phi([x; f_prev]), gamma = ||L^T phi||^2 + jitter. Operates in the
/// layer's own coordinates; no input or output scaling is applied.
std::pair<double, double> conditional_gaussian(const FidelityLayer& layer,
                                               const Eigen::VectorXd& x, double f_prev);

/// Output posteriors for every fidelity 1..M at x, in task units. Fidelity 1
/// is exact under the variational posterior; each later fidelity integrates
/// the conditional moments against the previous belief with Gauss-Hermite
/// quadrature and moment-matches the result to a Gaussian.
std::vector<GaussianBelief> output_posteriors(const MultiFidelityModel& model,
                                              const Eigen::VectorXd& x,
                                              const QuadratureRule& rule);

/// Conditional posteriors of fidelities m+1..M given fidelity m's output
/// value (task units). The first step conditions layer m+1 exactly at
/// f_m_value; later steps propagate by quadrature as in output_posteriors.
/// Requires m < M.
std::vector<ConditionalBelief> conditional_posterior_chain(const MultiFidelityModel& model,
                                                           const Eigen::VectorXd& x, int fidelity,
                                                           double f_m_value,
                                                           const QuadratureRule& rule);

/// output_posteriors in z-scored units (no output scaler applied). The
/// acquisition layer works here; entropies differ from task units only by
/// the additive log of each fidelity's output spread. up_to_fidelity limits
/// the chain (0 means all fidelities).
std::vector<GaussianBelief> output_posteriors_internal(const MultiFidelityModel& model,
                                                       const Eigen::VectorXd& x,
                                                       const QuadratureRule& rule,
                                                       int up_to_fidelity = 0);

/// conditional_posterior_chain in z-scored units; f_m_internal is in fidelity
/// m's z-scored units.
std::vector<ConditionalBelief> conditional_chain_internal(const MultiFidelityModel& model,
                                                          const Eigen::VectorXd& x, int fidelity,
                                                          double f_m_internal,
                                                          const QuadratureRule& rule);

}  // namespace mfbo
