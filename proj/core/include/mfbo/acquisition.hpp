#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "mfbo/belief.hpp"
#include "mfbo/cost.hpp"
#include "mfbo/optim.hpp"
#include "mfbo/quadrature.hpp"
#include "mfbo/surrogate.hpp"

namespace mfbo {

/// Monte-Carlo sample of the top-fidelity maximum value, task units.
struct MaxValueSamples {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
};

void validate_max_values(const MaxValueSamples& samples);

/// The three truncation integrals behind the conditional-entropy surrogate,
/// plus the standardized truncation point for the top fidelity.
struct TruncationStats {
  double z = 0.0;   // normalizing mass
  double z1 = 0.0;  // first moment integral
  double z2 = 0.0;  // second moment integral
  double beta = 0.0;
};

/// Differential entropy of N(., eta): log(2*pi*e*eta) / 2.
double gaussian_entropy(double eta);

/// Entropy of the top-fidelity posterior truncated above at f_star:
/// log(sqrt(2*pi*e*eta) * Phi(beta)) - beta * pdf(beta) / (2 * Phi(beta)),
/// beta = (f_star - alpha) / sqrt(eta), clamped below at -8 so the tail
/// ratio stays representable. Units follow the belief passed in.
double truncated_entropy_top(const GaussianBelief& belief, double f_star);

/// Moment-matched entropy of fidelity m's posterior given max(f_M) <= f_star
/// for m < M, task units: weights the belief's quadrature nodes by the chained
/// survival factor Phi((f_star - alpha_hat_M)/sqrt(eta_hat_M)) and returns the
/// entropy of the matched Gaussian.
double truncated_entropy_lower(const MultiFidelityModel& model, const Eigen::VectorXd& x,
                               int fidelity, double f_star, const QuadratureRule& rule);

/// The truncation integrals at (x, fidelity). For the top fidelity the closed
/// form of the upper-truncated Gaussian fills z/z1/z2 and beta; otherwise they
/// come from the quadrature accumulation used by truncated_entropy_lower and
/// beta is 0. Task units.
TruncationStats truncation_stats(const MultiFidelityModel& model, const Eigen::VectorXd& x,
                                 int fidelity, double f_star, const QuadratureRule& rule);

/// Draws S top-fidelity posterior sample paths via reparameterized weights
/// and maximizes each over the domain with multi-start L-BFGS.
MaxValueSamples sample_max_values(const MultiFidelityModel& model, const BoxDomain& domain,
                                  int n_samples, const LbfgsConfig& lbfgs_cfg,
                                  std::uint64_t rng_seed);

/// Decomposition of the acquisition score at one (x, fidelity) pair.
struct MutualInfoParts {
  double h0 = 0.0;      // marginal entropy of fidelity m's output
  double h1_mean = 0.0; // conditional entropy averaged over the max samples
  double raw = 0.0;     // h0 - h1_mean, before clamping
  double score = 0.0;   // max(raw, 0) / lambda_m
};

MutualInfoParts mutual_info_parts(const Eigen::VectorXd& x, int fidelity,
                                  const MultiFidelityModel& model, const CostModel& costs,
                                  const MaxValueSamples& fstars, const QuadratureRule& rule);

/// Cost-weighted information gain about the top-fidelity maximum from
/// querying fidelity m at x: max(H0 - mean H1, 0) / lambda_m.
double mutual_info(const Eigen::VectorXd& x, int fidelity, const MultiFidelityModel& model,
                   const CostModel& costs, const MaxValueSamples& fstars,
                   const QuadratureRule& rule);

struct AcquisitionResult {
  Eigen::VectorXd x;
  int fidelity = 0;
  double score = 0.0;
};

/// Maximizes mutual_info over the box separately for every fidelity with
/// multi-start L-BFGS on central finite differences, then picks the best
/// pair; exact ties go to the cheaper fidelity. Throws only if every
/// fidelity fails to produce a finite score.
AcquisitionResult maximize_acquisition(const MultiFidelityModel& model, const CostModel& costs,
                                       const MaxValueSamples& fstars, const BoxDomain& domain,
                                       const LbfgsConfig& lbfgs_cfg, const QuadratureRule& rule,
                                       std::uint64_t rng_seed);

}  // namespace mfbo
