#include "mfbo/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "mfbo/rng.hpp"

namespace mfbo {

namespace {

using Eigen::Index;
using Eigen::Map;
using Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void apply_activation(Activation act, VectorXd& z) {
  if (act == Activation::tanh) {
    z = z.array().tanh();
  } else {
    z = z.cwiseMax(0.0);
  }
}

// Derivative of the activation at pre-activation z. ReLU takes subgradient 0
// at exactly 0.
VectorXd activation_derivative(Activation act, const VectorXd& z) {
  if (act == Activation::tanh) {
    return 1.0 - z.array().tanh().square();
  }
  return (z.array() > 0.0).cast<double>();
}

}  // namespace

void validate_architecture(const NetworkArchitecture& arch) {
  if (arch.layer_widths.size() < 2) {
    throw std::invalid_argument("architecture needs at least 2 layers");
  }
  for (int w : arch.layer_widths) {
    if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
  }
}

Eigen::Index parameter_count(const NetworkArchitecture& arch) {
  Index n = 0;
  for (int i = 0; i < arch.n_stages(); ++i) {
    const Index in = arch.layer_widths[i];
    const Index out = arch.layer_widths[i + 1];
    n += out * in + out;
  }
  return n;
}

Eigen::Index weight_offset(const NetworkArchitecture& arch, int layer, int row, int col) {
  Index off = 0;
  for (int i = 0; i < layer; ++i) {
    const Index in = arch.layer_widths[i];
    const Index out = arch.layer_widths[i + 1];
    off += out * in + out;
  }
  const Index in = arch.layer_widths[layer];
  return off + static_cast<Index>(row) * in + col;
}

Eigen::Index bias_offset(const NetworkArchitecture& arch, int layer, int row) {
  const Index in = arch.layer_widths[layer];
  const Index out = arch.layer_widths[layer + 1];
  return weight_offset(arch, layer, 0, 0) + out * in + row;
}

ParameterVector init_params(const NetworkArchitecture& arch, std::uint64_t rng_seed) {
  validate_architecture(arch);
  ParameterVector theta = ParameterVector::Zero(parameter_count(arch));
  auto engine = make_engine(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Index off = 0;
  for (int i = 0; i < arch.n_stages(); ++i) {
    const Index in = arch.layer_widths[i];
    const Index out = arch.layer_widths[i + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (Index k = 0; k < out * in; ++k) {
      theta[off + k] = scale * normal(engine);
    }
    off += out * in + out;  // biases stay zero
  }
  return theta;
}

BasisVector forward_basis(const NetworkArchitecture& arch, const ParameterVector& theta,
                          const Eigen::VectorXd& input) {
  validate_architecture(arch);
  if (theta.size() != parameter_count(arch)) {
    throw std::invalid_argument("parameter vector has wrong length");
  }
  if (input.size() != arch.input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(input.size()) +
                                ", architecture expects " + std::to_string(arch.input_dim()));
  }
  VectorXd h = input;
  Index off = 0;
  for (int i = 0; i < arch.n_stages(); ++i) {
    const Index in = arch.layer_widths[i];
    const Index out = arch.layer_widths[i + 1];
    Map<const RowMajorMatrix> weights(theta.data() + off, out, in);
    Map<const VectorXd> bias(theta.data() + off + out * in, out);
    VectorXd z = weights * h + bias;
    apply_activation(arch.activation, z);
    h = std::move(z);
    off += out * in + out;
  }
  return h;
}

std::pair<ParameterVector, Eigen::VectorXd> backward(const NetworkArchitecture& arch,
                                                     const ParameterVector& theta,
                                                     const Eigen::VectorXd& input,
                                                     const Eigen::VectorXd& cotangent) {
  validate_architecture(arch);
  if (theta.size() != parameter_count(arch)) {
    throw std::invalid_argument("parameter vector has wrong length");
  }
  if (input.size() != arch.input_dim()) {
    throw std::invalid_argument("input dimension mismatch in backward");
  }
  if (cotangent.size() != arch.basis_dim()) {
    throw std::invalid_argument("cotangent dimension mismatch in backward");
  }

  const int stages = arch.n_stages();
  std::vector<VectorXd> activations(stages + 1);
  std::vector<VectorXd> pre_activations(stages);
  activations[0] = input;
  Index off = 0;
  std::vector<Index> offsets(stages);
  for (int i = 0; i < stages; ++i) {
    offsets[i] = off;
    const Index in = arch.layer_widths[i];
    const Index out = arch.layer_widths[i + 1];
    Map<const RowMajorMatrix> weights(theta.data() + off, out, in);
    Map<const VectorXd> bias(theta.data() + off + out * in, out);
    pre_activations[i] = weights * activations[i] + bias;
    VectorXd h = pre_activations[i];
    apply_activation(arch.activation, h);
    activations[i + 1] = std::move(h);
    off += out * in + out;
  }

  ParameterVector grad_theta = ParameterVector::Zero(theta.size());
  VectorXd cot = cotangent;
  for (int i = stages - 1; i >= 0; --i) {
    const Index in = arch.layer_widths[i];
    const Index out = arch.layer_widths[i + 1];
    const VectorXd cot_z =
        cot.cwiseProduct(activation_derivative(arch.activation, pre_activations[i]));
    Map<RowMajorMatrix> grad_w(grad_theta.data() + offsets[i], out, in);
    Map<VectorXd> grad_b(grad_theta.data() + offsets[i] + out * in, out);
    grad_w = cot_z * activations[i].transpose();
    grad_b = cot_z;
    Map<const RowMajorMatrix> weights(theta.data() + offsets[i], out, in);
    cot = weights.transpose() * cot_z;
  }
  return {std::move(grad_theta), std::move(cot)};
}

}  // namespace mfbo
