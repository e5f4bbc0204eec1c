#include "mfbo/surrogate.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mfbo/gaussian.hpp"
#include "mfbo/rng.hpp"

namespace mfbo {

namespace {

constexpr double initial_log_sigma2 = -4.605170185988091;  // log(1e-2)
constexpr double min_log_sigma2 = -18.420680743952367;     // log(1e-8)

struct NoisyWeightSample {
  std::vector<Eigen::VectorXd> weights;
  std::vector<Eigen::VectorXd> noise;
};

NoisyWeightSample sample_weights_with_noise(const MultiFidelityModel& model,
                                            std::uint64_t rng_seed) {
  auto engine = make_engine(rng_seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  NoisyWeightSample sample;
  sample.weights.reserve(model.layers.size());
  sample.noise.reserve(model.layers.size());
  for (const FidelityLayer& layer : model.layers) {
    Eigen::VectorXd eps(layer.basis_dim());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = unit(engine);
    sample.weights.push_back(layer.mu + layer.chol.triangularView<Eigen::Lower>() * eps);
    sample.noise.push_back(std::move(eps));
  }
  return sample;
}

struct ChainCache {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<BasisVector> bases;
  std::vector<double> outputs;
};

// Chained forward pass in normalized space. `weights` are internal-scale
// output weights, `xs` the normalized input; returns the internal-scale
// output of `fidelity`.
double chain_forward(const MultiFidelityModel& model, const std::vector<Eigen::VectorXd>& weights,
                     const Eigen::VectorXd& xs, int fidelity, ChainCache* cache) {
  const int d = model.input_dim();
  double f = 0.0;
  for (int j = 1; j <= fidelity; ++j) {
    const FidelityLayer& layer = model.layers[static_cast<std::size_t>(j - 1)];
    Eigen::VectorXd input;
    if (j == 1) {
      input = xs;
    } else {
      input.resize(d + 1);
      input.head(d) = xs;
      input[d] = f;
    }
    BasisVector phi = forward_basis(layer.arch, layer.theta, input);
    f = weights[static_cast<std::size_t>(j - 1)].dot(phi);
    if (!std::isfinite(f)) {
      throw std::runtime_error("non-finite network output at fidelity " + std::to_string(j));
    }
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(input));
      cache->bases.push_back(std::move(phi));
      cache->outputs.push_back(f);
    }
  }
  return f;
}

void check_fidelity(const MultiFidelityModel& model, int fidelity) {
  if (fidelity < 1 || fidelity > model.fidelities()) {
    throw std::invalid_argument("fidelity " + std::to_string(fidelity) + " out of range [1, " +
                                std::to_string(model.fidelities()) + "]");
  }
}

void check_input(const MultiFidelityModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.input_dim()));
  }
}

}  // namespace

double FidelityLayer::sigma2() const { return std::exp(log_sigma2); }

void validate_layer(const FidelityLayer& layer) {
  validate_architecture(layer.arch);
  if (layer.theta.size() != parameter_count(layer.arch)) {
    throw std::invalid_argument("hyper-weight vector has wrong size");
  }
  const int basis = layer.arch.basis_dim();
  if (layer.mu.size() != basis) {
    throw std::invalid_argument("variational mean has wrong size");
  }
  if (layer.chol.rows() != basis || layer.chol.cols() != basis) {
    throw std::invalid_argument("variational Cholesky factor has wrong shape");
  }
  for (int i = 0; i < basis; ++i) {
    if (!(layer.chol(i, i) > 0.0)) {
      throw std::invalid_argument("variational Cholesky factor needs a positive diagonal");
    }
    for (int j = i + 1; j < basis; ++j) {
      if (layer.chol(i, j) != 0.0) {
        throw std::invalid_argument("variational Cholesky factor must be lower triangular");
      }
    }
  }
  if (!std::isfinite(layer.log_sigma2)) {
    throw std::invalid_argument("noise parameter must be finite");
  }
}

Eigen::VectorXd MultiFidelityModel::scale_input(const Eigen::VectorXd& x) const {
  return (x - domain.lower).cwiseQuotient(domain.width());
}

void validate_model(const MultiFidelityModel& model) {
  validate_domain(model.domain);
  if (model.layers.empty()) {
    throw std::invalid_argument("model needs at least one fidelity");
  }
  if (model.scalers.size() != model.layers.size()) {
    throw std::invalid_argument("one output scaler per fidelity required");
  }
  const int d = model.input_dim();
  for (std::size_t m = 0; m < model.layers.size(); ++m) {
    validate_layer(model.layers[m]);
    const int expected = m == 0 ? d : d + 1;
    if (model.layers[m].input_dim() != expected) {
      throw std::invalid_argument("fidelity " + std::to_string(m + 1) + " expects input width " +
                                  std::to_string(expected) + ", architecture has " +
                                  std::to_string(model.layers[m].input_dim()));
    }
    if (!(model.scalers[m].stddev > 0.0)) {
      throw std::invalid_argument("output scaler needs a positive spread");
    }
  }
}

MultiFidelityModel make_model(const BoxDomain& domain,
                              const std::vector<NetworkArchitecture>& archs, std::uint64_t seed) {
  MultiFidelityModel model;
  model.domain = domain;
  model.layers.reserve(archs.size());
  for (std::size_t m = 0; m < archs.size(); ++m) {
    FidelityLayer layer;
    layer.arch = archs[m];
    layer.theta = init_params(archs[m], derive_seed(seed, m + 1));
    layer.mu = Eigen::VectorXd::Zero(archs[m].basis_dim());
    layer.chol = Eigen::MatrixXd::Identity(archs[m].basis_dim(), archs[m].basis_dim());
    layer.log_sigma2 = initial_log_sigma2;
    model.layers.push_back(std::move(layer));
  }
  model.scalers.assign(archs.size(), OutputScaler{});
  validate_model(model);
  return model;
}

MultiFidelityModel reset_variational(const MultiFidelityModel& model) {
  MultiFidelityModel fresh = model;
  for (FidelityLayer& layer : fresh.layers) {
    layer.mu.setZero();
    layer.chol = Eigen::MatrixXd::Identity(layer.basis_dim(), layer.basis_dim());
    layer.log_sigma2 = initial_log_sigma2;
  }
  return fresh;
}

std::size_t Dataset::total() const {
  std::size_t n = 0;
  for (const auto& level : observations) n += level.size();
  return n;
}

void Dataset::add(int fidelity, Eigen::VectorXd x, double y) {
  if (fidelity < 1 || fidelity > fidelities()) {
    throw std::invalid_argument("fidelity " + std::to_string(fidelity) + " out of range");
  }
  if (!std::isfinite(y)) {
    throw std::invalid_argument("observation value must be finite");
  }
  observations[static_cast<std::size_t>(fidelity - 1)].emplace_back(std::move(x), y);
}

WeightSample sample_weights(const MultiFidelityModel& model, std::uint64_t rng_seed) {
  return WeightSample{sample_weights_with_noise(model, rng_seed).weights};
}

double deterministic_output(const MultiFidelityModel& model, const WeightSample& sample,
                            const Eigen::VectorXd& x, int fidelity) {
  check_fidelity(model, fidelity);
  check_input(model, x);
  if (sample.weights.size() != model.layers.size()) {
    throw std::invalid_argument("weight sample does not match the model");
  }
  const double f = chain_forward(model, sample.weights, model.scale_input(x), fidelity, nullptr);
  return model.scaler(fidelity).to_external(f);
}

std::pair<double, Eigen::VectorXd> deterministic_output_grad(const MultiFidelityModel& model,
                                                             const WeightSample& sample,
                                                             const Eigen::VectorXd& x,
                                                             int fidelity) {
  check_fidelity(model, fidelity);
  check_input(model, x);
  if (sample.weights.size() != model.layers.size()) {
    throw std::invalid_argument("weight sample does not match the model");
  }
  const int d = model.input_dim();
  ChainCache cache;
  const double f =
      chain_forward(model, sample.weights, model.scale_input(x), fidelity, &cache);

  // d f_j / d xs accumulated through the chain: each stage contributes its
  // direct input gradient plus the recurrent term through the appended output.
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  for (int j = 1; j <= fidelity; ++j) {
    const FidelityLayer& layer = model.layers[static_cast<std::size_t>(j - 1)];
    const auto [grad_theta, grad_input] =
        backward(layer.arch, layer.theta, cache.inputs[static_cast<std::size_t>(j - 1)],
                 sample.weights[static_cast<std::size_t>(j - 1)]);
    if (j == 1) {
      total = grad_input;
    } else {
      total = grad_input.head(d) + grad_input[d] * total;
    }
  }
  const double spread = model.scaler(fidelity).stddev;
  Eigen::VectorXd grad_x = spread * total.cwiseQuotient(model.domain.width());
  return {model.scaler(fidelity).to_external(f), std::move(grad_x)};
}

double kl_to_prior(const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol) {
  if (chol.rows() != chol.cols() || chol.rows() != mu.size()) {
    throw std::invalid_argument("mean and Cholesky factor dimensions disagree");
  }
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < chol.rows(); ++i) {
    if (!(chol(i, i) > 0.0)) {
      throw std::invalid_argument("Cholesky factor needs a positive diagonal");
    }
    log_det += std::log(chol(i, i));
  }
  const double trace = chol.triangularView<Eigen::Lower>().toDenseMatrix().squaredNorm();
  return 0.5 * (trace + mu.squaredNorm() - static_cast<double>(mu.size())) - log_det;
}

ElboResult elbo_estimate(const MultiFidelityModel& model, const Dataset& data,
                         std::uint64_t eps_seed) {
  if (data.fidelities() != model.fidelities()) {
    throw std::invalid_argument("dataset has " + std::to_string(data.fidelities()) +
                                " fidelities, model has " + std::to_string(model.fidelities()));
  }
  const int d = model.input_dim();
  const int n_fidelities = model.fidelities();
  const NoisyWeightSample sample = sample_weights_with_noise(model, eps_seed);

  ElboResult result;
  result.gradients.resize(static_cast<std::size_t>(n_fidelities));
  for (int m = 0; m < n_fidelities; ++m) {
    const FidelityLayer& layer = model.layers[static_cast<std::size_t>(m)];
    LayerGradient& grad = result.gradients[static_cast<std::size_t>(m)];
    grad.theta = ParameterVector::Zero(layer.theta.size());
    grad.mu = Eigen::VectorXd::Zero(layer.basis_dim());
    grad.chol = Eigen::MatrixXd::Zero(layer.basis_dim(), layer.basis_dim());
    grad.log_sigma2 = 0.0;

    result.value -= kl_to_prior(layer.mu, layer.chol);
    grad.mu -= layer.mu;
    for (int i = 0; i < layer.basis_dim(); ++i) {
      for (int j = 0; j < i; ++j) grad.chol(i, j) -= layer.chol(i, j);
      grad.chol(i, i) -= layer.chol(i, i) - 1.0 / layer.chol(i, i);
    }
  }

  for (int m = 1; m <= n_fidelities; ++m) {
    const FidelityLayer& layer = model.layers[static_cast<std::size_t>(m - 1)];
    const double noise_var = layer.sigma2();
    for (const auto& [x, y] : data.observations[static_cast<std::size_t>(m - 1)]) {
      check_input(model, x);
      ChainCache cache;
      const double predicted =
          chain_forward(model, sample.weights, model.scale_input(x), m, &cache);
      const double residual = model.scaler(m).to_internal(y) - predicted;
      result.value += gaussian_log_density(residual, 0.0, noise_var);
      result.gradients[static_cast<std::size_t>(m - 1)].log_sigma2 +=
          -0.5 + residual * residual / (2.0 * noise_var);

      // Reverse pass through the chain: cotangent on the stage output feeds
      // the sampled weights (hence mu and L via the reparameterization) and
      // the hyper-weights, then flows into the previous stage through the
      // appended output coordinate.
      double cot = residual / noise_var;
      for (int j = m; j >= 1; --j) {
        const FidelityLayer& stage = model.layers[static_cast<std::size_t>(j - 1)];
        LayerGradient& grad = result.gradients[static_cast<std::size_t>(j - 1)];
        const BasisVector& phi = cache.bases[static_cast<std::size_t>(j - 1)];
        const Eigen::VectorXd grad_w = cot * phi;
        grad.mu += grad_w;
        grad.chol.triangularView<Eigen::Lower>() +=
            grad_w * sample.noise[static_cast<std::size_t>(j - 1)].transpose();
        const auto [grad_theta, grad_input] =
            backward(stage.arch, stage.theta, cache.inputs[static_cast<std::size_t>(j - 1)],
                     cot * sample.weights[static_cast<std::size_t>(j - 1)]);
        grad.theta += grad_theta;
        if (j > 1) cot = grad_input[d];
      }
    }
  }
  return result;
}

ModelPacking::ModelPacking(const MultiFidelityModel& model) {
  spans_.reserve(model.layers.size());
  for (const FidelityLayer& layer : model.layers) {
    LayerSpan span;
    span.theta_size = layer.theta.size();
    span.basis_dim = layer.basis_dim();
    span.theta_offset = total_size_;
    span.mu_offset = span.theta_offset + span.theta_size;
    span.chol_offset = span.mu_offset + span.basis_dim;
    const Eigen::Index chol_size =
        static_cast<Eigen::Index>(span.basis_dim) * (span.basis_dim + 1) / 2;
    span.log_sigma2_offset = span.chol_offset + chol_size;
    log_sigma2_indices_.push_back(span.log_sigma2_offset);
    total_size_ = span.log_sigma2_offset + 1;
    spans_.push_back(span);
  }
}

Eigen::VectorXd ModelPacking::pack(const MultiFidelityModel& model) const {
  Eigen::VectorXd packed(total_size_);
  for (std::size_t m = 0; m < spans_.size(); ++m) {
    const LayerSpan& span = spans_[m];
    const FidelityLayer& layer = model.layers[m];
    packed.segment(span.theta_offset, span.theta_size) = layer.theta;
    packed.segment(span.mu_offset, span.basis_dim) = layer.mu;
    Eigen::Index k = span.chol_offset;
    for (int i = 0; i < span.basis_dim; ++i) {
      for (int j = 0; j < i; ++j) packed[k++] = layer.chol(i, j);
      packed[k++] = std::log(layer.chol(i, i));
    }
    packed[span.log_sigma2_offset] = layer.log_sigma2;
  }
  return packed;
}

void ModelPacking::unpack(const Eigen::VectorXd& packed, MultiFidelityModel& model) const {
  if (packed.size() != total_size_ || model.layers.size() != spans_.size()) {
    throw std::invalid_argument("packed vector does not match the model layout");
  }
  for (std::size_t m = 0; m < spans_.size(); ++m) {
    const LayerSpan& span = spans_[m];
    FidelityLayer& layer = model.layers[m];
    layer.theta = packed.segment(span.theta_offset, span.theta_size);
    layer.mu = packed.segment(span.mu_offset, span.basis_dim);
    layer.chol.setZero(span.basis_dim, span.basis_dim);
    Eigen::Index k = span.chol_offset;
    for (int i = 0; i < span.basis_dim; ++i) {
      for (int j = 0; j < i; ++j) layer.chol(i, j) = packed[k++];
      layer.chol(i, i) = std::exp(packed[k++]);
    }
    layer.log_sigma2 = packed[span.log_sigma2_offset];
  }
}

Eigen::VectorXd ModelPacking::pack_gradient(const MultiFidelityModel& model,
                                            const std::vector<LayerGradient>& gradients) const {
  if (gradients.size() != spans_.size()) {
    throw std::invalid_argument("gradient list does not match the model layout");
  }
  Eigen::VectorXd packed(total_size_);
  for (std::size_t m = 0; m < spans_.size(); ++m) {
    const LayerSpan& span = spans_[m];
    const LayerGradient& grad = gradients[m];
    packed.segment(span.theta_offset, span.theta_size) = grad.theta;
    packed.segment(span.mu_offset, span.basis_dim) = grad.mu;
    Eigen::Index k = span.chol_offset;
    for (int i = 0; i < span.basis_dim; ++i) {
      for (int j = 0; j < i; ++j) packed[k++] = grad.chol(i, j);
      packed[k++] = grad.chol(i, i) * model.layers[m].chol(i, i);
    }
    packed[span.log_sigma2_offset] = grad.log_sigma2;
  }
  return packed;
}

TrainResult train(const MultiFidelityModel& model, const Dataset& data,
                  const TrainOptions& opts) {
  if (data.fidelities() != model.fidelities()) {
    throw std::invalid_argument("dataset has " + std::to_string(data.fidelities()) +
                                " fidelities, model has " + std::to_string(model.fidelities()));
  }
  if (data.total() == 0) {
    throw std::invalid_argument("training requires at least one observation");
  }
  if (opts.n_mc < 1) {
    throw std::invalid_argument("n_mc must be at least 1");
  }

  MultiFidelityModel work = model;
  for (int m = 1; m <= work.fidelities(); ++m) {
    const auto& level = data.observations[static_cast<std::size_t>(m - 1)];
    OutputScaler scaler;
    if (!level.empty()) {
      double mean = 0.0;
      for (const auto& [x, y] : level) mean += y;
      mean /= static_cast<double>(level.size());
      double spread = 1.0;
      if (level.size() >= 2) {
        double ss = 0.0;
        for (const auto& [x, y] : level) ss += (y - mean) * (y - mean);
        spread = std::sqrt(ss / static_cast<double>(level.size() - 1));
        if (!(spread > 1e-12)) spread = 1.0;
      }
      scaler = OutputScaler{mean, spread};
    }
    work.scalers[static_cast<std::size_t>(m - 1)] = scaler;
  }

  const ModelPacking packing(work);
  Eigen::VectorXd params = packing.pack(work);
  AdamState state(params.size(), opts.adam);
  TrainResult result;
  result.elbo_history.reserve(static_cast<std::size_t>(opts.adam.max_epochs));

  for (int epoch = 0; epoch < opts.adam.max_epochs; ++epoch) {
    packing.unpack(params, work);
    double value = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
    for (int i = 0; i < opts.n_mc; ++i) {
      const std::uint64_t eps_seed =
          derive_seed(opts.seed, static_cast<std::uint64_t>(epoch) *
                                         static_cast<std::uint64_t>(opts.n_mc) +
                                     static_cast<std::uint64_t>(i) + 1);
      const ElboResult estimate = elbo_estimate(work, data, eps_seed);
      value += estimate.value;
      grad += packing.pack_gradient(work, estimate.gradients);
    }
    value /= static_cast<double>(opts.n_mc);
    grad /= static_cast<double>(opts.n_mc);
    if (!std::isfinite(value) || !grad.allFinite()) {
      throw std::runtime_error("training objective turned non-finite at epoch " +
                               std::to_string(epoch));
    }
    result.elbo_history.push_back(value);
    grad = -grad;  // ascend the ELBO with a descent-form update
    state.step(params, grad);
    for (const Eigen::Index idx : packing.log_sigma2_indices()) {
      if (params[idx] < min_log_sigma2) params[idx] = min_log_sigma2;
    }
  }

  packing.unpack(params, work);
  result.model = std::move(work);
  return result;
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const auto& entry : arr) v[i++] = entry.get<double>();
  return v;
}

}  // namespace

std::string save_model(const MultiFidelityModel& model) {
  validate_model(model);
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["domain"]["lower"] = vector_to_json(model.domain.lower);
  doc["domain"]["upper"] = vector_to_json(model.domain.upper);
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t m = 0; m < model.layers.size(); ++m) {
    const FidelityLayer& layer = model.layers[m];
    nlohmann::json entry;
    entry["layer_widths"] = layer.arch.layer_widths;
    entry["activation"] = layer.arch.activation == Activation::relu ? "relu" : "tanh";
    entry["theta"] = vector_to_json(layer.theta);
    entry["mu"] = vector_to_json(layer.mu);
    nlohmann::json chol = nlohmann::json::array();
    for (int i = 0; i < layer.basis_dim(); ++i) {
      for (int j = 0; j <= i; ++j) chol.push_back(layer.chol(i, j));
    }
    entry["chol_lower"] = std::move(chol);
    entry["log_sigma2"] = layer.log_sigma2;
    entry["scaler"]["mean"] = model.scalers[m].mean;
    entry["scaler"]["stddev"] = model.scalers[m].stddev;
    layers.push_back(std::move(entry));
  }
  doc["fidelities"] = std::move(layers);
  return doc.dump(2);
}

MultiFidelityModel load_model(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& err) {
    throw std::runtime_error(std::string("model parse error: ") + err.what());
  }
  try {
    if (doc.at("format_version").get<int>() != 1) {
      throw std::runtime_error("unsupported model format version");
    }
    MultiFidelityModel model;
    model.domain.lower = vector_from_json(doc.at("domain").at("lower"));
    model.domain.upper = vector_from_json(doc.at("domain").at("upper"));
    for (const auto& entry : doc.at("fidelities")) {
      FidelityLayer layer;
      layer.arch.layer_widths = entry.at("layer_widths").get<std::vector<int>>();
      const std::string activation = entry.at("activation").get<std::string>();
      if (activation == "relu") {
        layer.arch.activation = Activation::relu;
      } else if (activation == "tanh") {
        layer.arch.activation = Activation::tanh;
      } else {
        throw std::runtime_error("unknown activation '" + activation + "'");
      }
      layer.theta = vector_from_json(entry.at("theta"));
      layer.mu = vector_from_json(entry.at("mu"));
      const int basis = static_cast<int>(layer.mu.size());
      layer.chol = Eigen::MatrixXd::Zero(basis, basis);
      const auto& chol = entry.at("chol_lower");
      if (static_cast<int>(chol.size()) != basis * (basis + 1) / 2) {
        throw std::runtime_error("Cholesky payload has the wrong length");
      }
      std::size_t k = 0;
      for (int i = 0; i < basis; ++i) {
        for (int j = 0; j <= i; ++j) layer.chol(i, j) = chol.at(k++).get<double>();
      }
      layer.log_sigma2 = entry.at("log_sigma2").get<double>();
      model.layers.push_back(std::move(layer));
      OutputScaler scaler;
      scaler.mean = entry.at("scaler").at("mean").get<double>();
      scaler.stddev = entry.at("scaler").at("stddev").get<double>();
      model.scalers.push_back(scaler);
    }
    validate_model(model);
    return model;
  } catch (const nlohmann::json::exception& err) {
    throw std::runtime_error(std::string("model parse error: ") + err.what());
  }
}

void save_model_file(const MultiFidelityModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << save_model(model) << '\n';
}

MultiFidelityModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "' for reading");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_model(buffer.str());
}

}  // namespace mfbo
