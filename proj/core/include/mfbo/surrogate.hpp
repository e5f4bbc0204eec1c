#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mfbo/network.hpp"
#include "mfbo/optim.hpp"

namespace mfbo {

/// Per-fidelity affine output normalization. Training z-scores observations;
/// predictions are mapped back at the API boundary.
struct OutputScaler {
  double mean = 0.0;
  double stddev = 1.0;

  double to_internal(double y) const { return (y - mean) / stddev; }
  double to_external(double f) const { return mean + stddev * f; }
};

/// One fidelity level: the basis network hyper-weights, a Gaussian variational
/// posterior N(mu, L L^T) over the output weights, and the observation noise.
struct FidelityLayer {
  NetworkArchitecture arch;
  ParameterVector theta;
  Eigen::VectorXd mu;
  Eigen::MatrixXd chol;  // lower triangular, strictly positive diagonal
  double log_sigma2 = 0.0;

  int input_dim() const { return arch.input_dim(); }
  int basis_dim() const { return arch.basis_dim(); }
  double sigma2() const;
};

/// Throws unless chol is lower-triangular with positive diagonal and all
/// dimensions are mutually consistent.
void validate_layer(const FidelityLayer& layer);

/// Ordered chain of fidelity layers. Layer 1 consumes the (normalized) input;
/// every later layer consumes the input with the previous fidelity's output
/// appended as one extra coordinate.
struct MultiFidelityModel {
  std::vector<FidelityLayer> layers;
  BoxDomain domain;
  std::vector<OutputScaler> scalers;

  int input_dim() const { return domain.dim(); }
  int fidelities() const { return static_cast<int>(layers.size()); }
  const FidelityLayer& layer(int fidelity) const { return layers.at(fidelity - 1); }
  const OutputScaler& scaler(int fidelity) const { return scalers.at(fidelity - 1); }

  /// Maps a domain point into [0,1]^d.
  Eigen::VectorXd scale_input(const Eigen::VectorXd& x) const;
};

void validate_model(const MultiFidelityModel& model);

/// Fresh model: fan-in initialized hyper-weights, variational posterior at the
/// prior (mu = 0, L = I), noise variance 1e-2, identity scalers.
MultiFidelityModel make_model(const BoxDomain& domain,
                              const std::vector<NetworkArchitecture>& archs, std::uint64_t seed);

/// Copy of `model` with the variational state and noise reset as in
/// make_model but the trained hyper-weights kept (warm start for retraining).
MultiFidelityModel reset_variational(const MultiFidelityModel& model);

/// Multi-fidelity observations; fidelity indices are 1-based.
struct Dataset {
  std::vector<std::vector<std::pair<Eigen::VectorXd, double>>> observations;

  explicit Dataset(int fidelities = 0) : observations(fidelities) {}
  int fidelities() const { return static_cast<int>(observations.size()); }
  std::size_t count(int fidelity) const { return observations.at(fidelity - 1).size(); }
  std::size_t total() const;
  void add(int fidelity, Eigen::VectorXd x, double y);
};

/// One reparameterized draw w_m = mu_m + L_m eps_m per fidelity.
struct WeightSample {
  std::vector<Eigen::VectorXd> weights;
};

WeightSample sample_weights(const MultiFidelityModel& model, std::uint64_t rng_seed);

/// Noiseless chained output at `fidelity` under a fixed weight draw, in task
/// units. Throws if any intermediate output is non-finite.
double deterministic_output(const MultiFidelityModel& model, const WeightSample& sample,
                            const Eigen::VectorXd& x, int fidelity);

/// deterministic_output together with its gradient with respect to x.
std::pair<double, Eigen::VectorXd> deterministic_output_grad(const MultiFidelityModel& model,
                                                             const WeightSample& sample,
                                                             const Eigen::VectorXd& x,
                                                             int fidelity);

/// KL(N(mu, L L^T) || N(0, I)) = (tr(LL^T) + mu^T mu - d - log det(LL^T)) / 2.
double kl_to_prior(const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol);

/// Gradients of the ELBO estimate, in natural parameter space. The chol block
/// is populated only on and below the diagonal.
struct LayerGradient {
  ParameterVector theta;
  Eigen::VectorXd mu;
  Eigen::MatrixXd chol;
  double log_sigma2 = 0.0;
};

struct ElboResult {
  double value = 0.0;
  std::vector<LayerGradient> gradients;
};

/// Single-sample reparameterized ELBO estimate and its exact gradients with
/// respect to every trainable block, with reverse-mode flow through the whole
/// fidelity chain including the sampled weights. A dataset with no
/// observations yields the pure negated-KL value.
ElboResult elbo_estimate(const MultiFidelityModel& model, const Dataset& data,
                         std::uint64_t eps_seed);

/// Flat view of all trainable parameters. Cholesky diagonals are stored in
/// log space so unconstrained steps preserve positive definiteness.
class ModelPacking {
 public:
  explicit ModelPacking(const MultiFidelityModel& model);

  Eigen::Index size() const { return total_size_; }
  Eigen::VectorXd pack(const MultiFidelityModel& model) const;
  void unpack(const Eigen::VectorXd& packed, MultiFidelityModel& model) const;
  /// Natural-space gradients -> packed-space gradients (chain rule through
  /// the log-diagonal map).
  Eigen::VectorXd pack_gradient(const MultiFidelityModel& model,
                                const std::vector<LayerGradient>& gradients) const;
  const std::vector<Eigen::Index>& log_sigma2_indices() const { return log_sigma2_indices_; }

 private:
  struct LayerSpan {
    Eigen::Index theta_offset;
    Eigen::Index mu_offset;
    Eigen::Index chol_offset;  // row-major lower triangle, diagonal in log space
    Eigen::Index log_sigma2_offset;
    int basis_dim;
    Eigen::Index theta_size;
  };
  std::vector<LayerSpan> spans_;
  std::vector<Eigen::Index> log_sigma2_indices_;
  Eigen::Index total_size_ = 0;
};

struct TrainOptions {
  AdamConfig adam;
  int n_mc = 1;
  std::uint64_t seed = 0;
};

struct TrainResult {
  MultiFidelityModel model;
  std::vector<double> elbo_history;
};

/// Stochastic variational training: z-scores the outputs per fidelity, then
/// ascends averaged n_mc-sample ELBO estimates with ADAM for
/// adam.max_epochs epochs. Noise variances are floored at 1e-8. Throws with
/// the epoch index if the ELBO estimate turns non-finite.
TrainResult train(const MultiFidelityModel& model, const Dataset& data, const TrainOptions& opts);

/// Self-describing text serialization (versioned JSON); round-trip exact.
std::string save_model(const MultiFidelityModel& model);
MultiFidelityModel load_model(const std::string& text);
void save_model_file(const MultiFidelityModel& model, const std::string& path);
MultiFidelityModel load_model_file(const std::string& path);

}  // namespace mfbo
