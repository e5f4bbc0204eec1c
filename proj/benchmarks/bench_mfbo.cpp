// Microbenchmarks for the hot paths: basis evaluation and its adjoint, rule
// construction, belief propagation, the training objective, and one
// acquisition evaluation.
#include <benchmark/benchmark.h>

#include <random>

#include "mfbo/acquisition.hpp"
#include "mfbo/belief.hpp"
#include "mfbo/network.hpp"
#include "mfbo/quadrature.hpp"
#include "mfbo/rng.hpp"
#include "mfbo/surrogate.hpp"

namespace {

using namespace mfbo;

NetworkArchitecture default_arch(int input_dim) {
  NetworkArchitecture arch;
  arch.layer_widths = {input_dim, 40, 40, 40};
  arch.activation = Activation::tanh;
  return arch;
}

MultiFidelityModel bench_model() {
  return make_model(BoxDomain::unit(4), {default_arch(4), default_arch(5)}, 7);
}

Eigen::VectorXd bench_point() {
  Eigen::VectorXd x(4);
  x << 0.2, 0.5, 0.8, 0.4;
  return x;
}

Dataset bench_data(const MultiFidelityModel& model) {
  auto engine = make_engine(11);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data(model.fidelities());
  for (int m = 1; m <= model.fidelities(); ++m) {
    for (int i = 0; i < (m == 1 ? 5 : 2); ++i) {
      Eigen::VectorXd x(4);
      for (int k = 0; k < 4; ++k) x[k] = uniform(engine);
      data.add(m, x, normal(engine));
    }
  }
  return data;
}

void bm_forward_basis(benchmark::State& state) {
  const NetworkArchitecture arch = default_arch(4);
  const ParameterVector theta = init_params(arch, 3);
  const Eigen::VectorXd x = bench_point();
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_basis(arch, theta, x));
  }
}
BENCHMARK(bm_forward_basis);

void bm_backward(benchmark::State& state) {
  const NetworkArchitecture arch = default_arch(4);
  const ParameterVector theta = init_params(arch, 3);
  const Eigen::VectorXd x = bench_point();
  const Eigen::VectorXd cotangent = Eigen::VectorXd::Ones(arch.basis_dim());
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward(arch, theta, x, cotangent));
  }
}
BENCHMARK(bm_backward);

void bm_gauss_hermite_rule(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(gauss_hermite_rule(20));
  }
}
BENCHMARK(bm_gauss_hermite_rule);

void bm_output_posteriors(benchmark::State& state) {
  const MultiFidelityModel model = bench_model();
  const Eigen::VectorXd x = bench_point();
  const QuadratureRule rule = gauss_hermite_rule(10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(output_posteriors(model, x, rule));
  }
}
BENCHMARK(bm_output_posteriors);

void bm_elbo_estimate(benchmark::State& state) {
  const MultiFidelityModel model = bench_model();
  const Dataset data = bench_data(model);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(elbo_estimate(model, data, ++seed));
  }
}
BENCHMARK(bm_elbo_estimate);

void bm_mutual_info(benchmark::State& state) {
  const MultiFidelityModel model = bench_model();
  const Eigen::VectorXd x = bench_point();
  const QuadratureRule rule = gauss_hermite_rule(10);
  const CostModel costs{{1.0, 10.0}};
  MaxValueSamples fstars;
  for (int s = 0; s < 10; ++s) fstars.values.push_back(1.0 + 0.1 * s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mutual_info(x, 2, model, costs, fstars, rule));
  }
}
BENCHMARK(bm_mutual_info);

}  // namespace

BENCHMARK_MAIN();
