#include "mfbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "mfbo/gaussian.hpp"
#include "mfbo/rng.hpp"

namespace mfbo {

namespace {

constexpr double min_beta = -8.0;
constexpr double min_survival = 1e-12;

// Entropy of N(alpha, eta) truncated above at f_star, same units as inputs.
double truncated_top_value(double alpha, double eta, double f_star) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("variance must be positive");
  }
  const double beta = std::max((f_star - alpha) / std::sqrt(eta), min_beta);
  const double log_mass = log_norm_cdf(beta);
  const double log_pdf = -0.5 * beta * beta - 0.5 * std::log(two_pi);
  const double tail_ratio = std::exp(log_pdf - log_mass);
  return 0.5 * (std::log(two_pi) + 1.0 + std::log(eta)) + log_mass -
         0.5 * beta * tail_ratio;
}

// Everything about the lower-fidelity truncation that does not depend on
// f_star: the fidelity-m belief, its quadrature nodes, and the chained
// top-fidelity conditional at each node. All z-scored units.
struct LowerChainStats {
  GaussianBelief belief;
  std::vector<double> nodes;
  std::vector<double> alpha_hat;
  std::vector<double> eta_hat;
};

LowerChainStats lower_chain_stats(const MultiFidelityModel& model, const Eigen::VectorXd& x,
                                  int fidelity, const QuadratureRule& rule) {
  LowerChainStats stats;
  stats.belief = output_posteriors_internal(model, x, rule, fidelity).back();
  const double spread = std::sqrt(stats.belief.eta);
  stats.nodes.reserve(rule.nodes.size());
  stats.alpha_hat.reserve(rule.nodes.size());
  stats.eta_hat.reserve(rule.nodes.size());
  for (const double z : rule.nodes) {
    const double node = stats.belief.alpha + spread * z;
    const ConditionalBelief top =
        conditional_chain_internal(model, x, fidelity, node, rule).back();
    stats.nodes.push_back(node);
    stats.alpha_hat.push_back(top.alpha_hat);
    stats.eta_hat.push_back(top.eta_hat);
  }
  return stats;
}

// Accumulates the truncation integrals for one f_star (z-scored top-fidelity
// units) against precomputed chain stats.
TruncationStats accumulate_stats(const LowerChainStats& stats, const QuadratureRule& rule,
                                 double f_star_internal) {
  TruncationStats out;
  for (std::size_t k = 0; k < stats.nodes.size(); ++k) {
    const double survival = std::clamp(
        norm_cdf((f_star_internal - stats.alpha_hat[k]) / std::sqrt(stats.eta_hat[k])),
        min_survival, 1.0);
    const double weighted = rule.weights[k] * survival;
    out.z += weighted;
    out.z1 += weighted * stats.nodes[k];
    out.z2 += weighted * stats.nodes[k] * stats.nodes[k];
  }
  if (out.z < min_survival) out.z = min_survival;
  return out;
}

double matched_entropy(const TruncationStats& stats) {
  const double mean = stats.z1 / stats.z;
  double variance = stats.z2 / stats.z - mean * mean;
  if (!std::isfinite(variance)) {
    throw std::runtime_error("non-finite truncation variance");
  }
  if (variance < variance_jitter) variance = variance_jitter;
  return 0.5 * (std::log(two_pi) + 1.0 + std::log(variance));
}

void check_point(const MultiFidelityModel& model, const Eigen::VectorXd& x, int fidelity) {
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.input_dim()));
  }
  if (fidelity < 1 || fidelity > model.fidelities()) {
    throw std::invalid_argument("fidelity " + std::to_string(fidelity) + " out of range [1, " +
                                std::to_string(model.fidelities()) + "]");
  }
}

}  // namespace

void validate_max_values(const MaxValueSamples& samples) {
  if (samples.values.empty()) {
    throw std::invalid_argument("need at least one max-value sample");
  }
  for (const double value : samples.values) {
    if (!std::isfinite(value)) {
      throw std::invalid_argument("max-value samples must be finite");
    }
  }
}

void validate_costs(const CostModel& costs, int fidelities) {
  if (costs.fidelities() != fidelities) {
    throw std::invalid_argument("cost model has " + std::to_string(costs.fidelities()) +
                                " fidelities, expected " + std::to_string(fidelities));
  }
  for (const double lambda : costs.lambdas) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw std::invalid_argument("query costs must be positive and finite");
    }
  }
}

double gaussian_entropy(double eta) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("entropy requires a positive variance");
  }
  return 0.5 * (std::log(two_pi) + 1.0 + std::log(eta));
}

double truncated_entropy_top(const GaussianBelief& belief, double f_star) {
  return truncated_top_value(belief.alpha, belief.eta, f_star);
}

double truncated_entropy_lower(const MultiFidelityModel& model, const Eigen::VectorXd& x,
                               int fidelity, double f_star, const QuadratureRule& rule) {
  check_point(model, x, fidelity);
  if (fidelity >= model.fidelities()) {
    throw std::invalid_argument("fidelity must be below the top for the chained entropy");
  }
  const LowerChainStats stats = lower_chain_stats(model, x, fidelity, rule);
  const double f_internal = model.scaler(model.fidelities()).to_internal(f_star);
  const TruncationStats integrals = accumulate_stats(stats, rule, f_internal);
  return matched_entropy(integrals) + std::log(model.scaler(fidelity).stddev);
}

TruncationStats truncation_stats(const MultiFidelityModel& model, const Eigen::VectorXd& x,
                                 int fidelity, double f_star, const QuadratureRule& rule) {
  check_point(model, x, fidelity);
  const int top = model.fidelities();
  if (fidelity == top) {
    const GaussianBelief belief = output_posteriors(model, x, rule).back();
    const double spread = std::sqrt(belief.eta);
    const double beta = (f_star - belief.alpha) / spread;
    const double clamped = std::max(beta, min_beta);
    const double mass = norm_cdf(clamped);
    const double hazard = norm_pdf(clamped) / mass;
    const double mean = belief.alpha - spread * hazard;
    const double variance = belief.eta * (1.0 - clamped * hazard - hazard * hazard);
    TruncationStats stats;
    stats.beta = beta;
    stats.z = mass;
    stats.z1 = mass * mean;
    stats.z2 = mass * (variance + mean * mean);
    return stats;
  }
  const LowerChainStats chain = lower_chain_stats(model, x, fidelity, rule);
  const double f_internal = model.scaler(top).to_internal(f_star);
  TruncationStats stats = accumulate_stats(chain, rule, f_internal);
  // Report the moment integrals in task units of fidelity m.
  const OutputScaler& scaler = model.scaler(fidelity);
  const double z1_internal = stats.z1;
  stats.z1 = stats.z * scaler.mean + scaler.stddev * z1_internal;
  stats.z2 = stats.z * scaler.mean * scaler.mean + 2.0 * scaler.mean * scaler.stddev * z1_internal +
             scaler.stddev * scaler.stddev * stats.z2;
  return stats;
}

MaxValueSamples sample_max_values(const MultiFidelityModel& model, const BoxDomain& domain,
                                  int n_samples, const LbfgsConfig& lbfgs_cfg,
                                  std::uint64_t rng_seed) {
  if (n_samples < 1) {
    throw std::invalid_argument("need at least one max-value sample");
  }
  const int top = model.fidelities();
  MaxValueSamples samples;
  samples.values.reserve(static_cast<std::size_t>(n_samples));
  for (int s = 0; s < n_samples; ++s) {
    const WeightSample weights =
        sample_weights(model, derive_seed(rng_seed, 2 * static_cast<std::uint64_t>(s)));
    ObjectiveWithGrad objective = [&model, &weights, top](const Eigen::VectorXd& x,
                                                          Eigen::VectorXd& grad) {
      auto [value, gradient] = deterministic_output_grad(model, weights, x, top);
      grad = std::move(gradient);
      return value;
    };
    const OptimResult result = lbfgs_maximize(
        objective, domain, lbfgs_cfg, derive_seed(rng_seed, 2 * static_cast<std::uint64_t>(s) + 1));
    samples.values.push_back(result.value);
  }
  validate_max_values(samples);
  return samples;
}

MutualInfoParts mutual_info_parts(const Eigen::VectorXd& x, int fidelity,
                                  const MultiFidelityModel& model, const CostModel& costs,
                                  const MaxValueSamples& fstars, const QuadratureRule& rule) {
  check_point(model, x, fidelity);
  validate_costs(costs, model.fidelities());
  validate_max_values(fstars);
  const int top = model.fidelities();
  const OutputScaler& top_scaler = model.scaler(top);

  MutualInfoParts parts;
  double h1_sum = 0.0;
  if (fidelity == top) {
    const GaussianBelief belief = output_posteriors_internal(model, x, rule).back();
    parts.h0 = gaussian_entropy(belief.eta);
    for (const double f_star : fstars.values) {
      h1_sum += truncated_top_value(belief.alpha, belief.eta, top_scaler.to_internal(f_star));
    }
  } else {
    const LowerChainStats stats = lower_chain_stats(model, x, fidelity, rule);
    parts.h0 = gaussian_entropy(stats.belief.eta);
    for (const double f_star : fstars.values) {
      const TruncationStats integrals =
          accumulate_stats(stats, rule, top_scaler.to_internal(f_star));
      h1_sum += matched_entropy(integrals);
    }
  }
  parts.h1_mean = h1_sum / static_cast<double>(fstars.size());
  parts.raw = parts.h0 - parts.h1_mean;
  parts.score = std::max(parts.raw, 0.0) / costs.cost(fidelity);
  return parts;
}

double mutual_info(const Eigen::VectorXd& x, int fidelity, const MultiFidelityModel& model,
                   const CostModel& costs, const MaxValueSamples& fstars,
                   const QuadratureRule& rule) {
  return mutual_info_parts(x, fidelity, model, costs, fstars, rule).score;
}

AcquisitionResult maximize_acquisition(const MultiFidelityModel& model, const CostModel& costs,
                                       const MaxValueSamples& fstars, const BoxDomain& domain,
                                       const LbfgsConfig& lbfgs_cfg, const QuadratureRule& rule,
                                       std::uint64_t rng_seed) {
  validate_costs(costs, model.fidelities());
  validate_max_values(fstars);
  AcquisitionResult best;
  bool found = false;
  std::string last_error = "no fidelity evaluated";
  for (int m = 1; m <= model.fidelities(); ++m) {
    auto value_fn = [&model, &costs, &fstars, &rule, m](const Eigen::VectorXd& x) {
      return mutual_info(x, m, model, costs, fstars, rule);
    };
    try {
      ObjectiveWithGrad objective = finite_difference_objective(value_fn, domain, 1e-5);
      const OptimResult result =
          lbfgs_maximize(objective, domain, lbfgs_cfg,
                         derive_seed(rng_seed, static_cast<std::uint64_t>(m)));
      if (std::isfinite(result.value) && (!found || result.value > best.score)) {
        best.x = result.x;
        best.fidelity = m;
        best.score = result.value;
        found = true;
      }
    } catch (const std::exception& err) {
      last_error = err.what();
    }
  }
  if (!found) {
    throw std::runtime_error("acquisition failed at every fidelity: " + last_error);
  }
  return best;
}

}  // namespace mfbo
