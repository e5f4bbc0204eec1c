#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

namespace mfbo {

enum class Activation { relu, tanh };

/// Flat weight/bias storage for all layers of a basis network. Layout is
/// fixed: for each layer transition i the weight matrix W_i (rows = width of
/// layer i+1, cols = width of layer i) in row-major order, immediately
/// followed by the bias b_i. Optimizers treat the whole thing as one vector.
using ParameterVector = Eigen::VectorXd;

/// Output of the basis map: the activated final layer.
using BasisVector = Eigen::VectorXd;

/// Widths of every layer including the input layer; the final width is the
/// basis dimension. The activation is applied after every affine stage.
struct NetworkArchitecture {
  std::vector<int> layer_widths;
  Activation activation = Activation::tanh;

  int input_dim() const { return layer_widths.front(); }
  int basis_dim() const { return layer_widths.back(); }
  int n_stages() const { return static_cast<int>(layer_widths.size()) - 1; }
};

/// Throws std::invalid_argument unless there are at least two layers and all
/// widths are positive.
void validate_architecture(const NetworkArchitecture& arch);

/// Number of entries a ParameterVector for `arch` must have.
Eigen::Index parameter_count(const NetworkArchitecture& arch);

/// Offset of W_layer (row, col) inside the flat vector.
Eigen::Index weight_offset(const NetworkArchitecture& arch, int layer, int row, int col);

/// Offset of b_layer (row) inside the flat vector.
Eigen::Index bias_offset(const NetworkArchitecture& arch, int layer, int row);

/// Weights ~ N(0, 1/fan_in), biases zero. Deterministic given the seed.
ParameterVector init_params(const NetworkArchitecture& arch, std::uint64_t rng_seed);

/// Evaluates the basis map: h <- act(W h + b) through every stage.
BasisVector forward_basis(const NetworkArchitecture& arch, const ParameterVector& theta,
                          const Eigen::VectorXd& input);

/// Vector-Jacobian products of cotangent^T * forward_basis with respect to
/// the parameters and the input. ReLU uses subgradient 0 at exactly 0.
std::pair<ParameterVector, Eigen::VectorXd> backward(const NetworkArchitecture& arch,
                                                     const ParameterVector& theta,
                                                     const Eigen::VectorXd& input,
                                                     const Eigen::VectorXd& cotangent);

}  // namespace mfbo
