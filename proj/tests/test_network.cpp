#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mfbo/network.hpp"
#include "mfbo/rng.hpp"
#include "test_common.hpp"

using namespace mfbo;
using mfbo::testing::make_arch;
using mfbo::testing::vec;

TEST_CASE("init_params zeroes every bias") {
  const auto arch = make_arch({1, 1});
  const ParameterVector theta = init_params(arch, 42);
  REQUIRE(theta.size() == 2);
  CHECK(theta[bias_offset(arch, 0, 0)] == 0.0);

  const auto deep = make_arch({3, 5, 2});
  const ParameterVector dt = init_params(deep, 9);
  for (int row = 0; row < 5; ++row) CHECK(dt[bias_offset(deep, 0, row)] == 0.0);
  for (int row = 0; row < 2; ++row) CHECK(dt[bias_offset(deep, 1, row)] == 0.0);
}

TEST_CASE("init_params is deterministic per seed") {
  const auto arch = make_arch({2, 8, 4});
  const ParameterVector a = init_params(arch, 123);
  const ParameterVector b = init_params(arch, 123);
  const ParameterVector c = init_params(arch, 124);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("init_params weight variance tracks 1/fan_in") {
  const auto arch = make_arch({2, 32, 32});
  double sq0 = 0.0, sq1 = 0.0;
  long n0 = 0, n1 = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const ParameterVector theta = init_params(arch, 7 + static_cast<std::uint64_t>(rep));
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 2; ++c) {
        const double w = theta[weight_offset(arch, 0, r, c)];
        sq0 += w * w;
        ++n0;
      }
    }
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        const double w = theta[weight_offset(arch, 1, r, c)];
        sq1 += w * w;
        ++n1;
      }
    }
  }
  const double var0 = sq0 / n0;
  const double var1 = sq1 / n1;
  CHECK(var0 == doctest::Approx(1.0 / 2.0).epsilon(0.3));
  CHECK(var1 == doctest::Approx(1.0 / 32.0).epsilon(0.3));
}

TEST_CASE("forward_basis of an all-zero relu network is zero") {
  const auto arch = make_arch({2, 3, 4}, Activation::relu);
  const ParameterVector theta = ParameterVector::Zero(parameter_count(arch));
  const BasisVector basis = forward_basis(arch, theta, vec({0.7, -1.3}));
  CHECK(basis.size() == 4);
  for (Eigen::Index i = 0; i < basis.size(); ++i) CHECK(basis[i] == 0.0);
}

TEST_CASE("identity affine layer with tanh applies tanh elementwise") {
  const auto arch = make_arch({3, 3}, Activation::tanh);
  ParameterVector theta = ParameterVector::Zero(parameter_count(arch));
  for (int i = 0; i < 3; ++i) theta[weight_offset(arch, 0, i, i)] = 1.0;
  const Eigen::VectorXd x = vec({0.2, -0.9, 1.5});
  const BasisVector basis = forward_basis(arch, theta, x);
  for (int i = 0; i < 3; ++i) CHECK(basis[i] == doctest::Approx(std::tanh(x[i])).epsilon(1e-15));
}

TEST_CASE("forward_basis matches a straight-line recurrence") {
  const auto arch = make_arch({2, 5, 3}, Activation::tanh);
  const ParameterVector theta = init_params(arch, 31);
  const Eigen::VectorXd x = vec({0.4, -0.8});

  Eigen::VectorXd h = x;
  for (int layer = 0; layer < arch.n_stages(); ++layer) {
    const int rows = arch.layer_widths[layer + 1];
    const int cols = arch.layer_widths[layer];
    Eigen::VectorXd next(rows);
    for (int r = 0; r < rows; ++r) {
      double acc = theta[bias_offset(arch, layer, r)];
      for (int c = 0; c < cols; ++c) acc += theta[weight_offset(arch, layer, r, c)] * h[c];
      next[r] = std::tanh(acc);
    }
    h = next;
  }

  const BasisVector basis = forward_basis(arch, theta, x);
  REQUIRE(basis.size() == h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) CHECK(basis[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("forward_basis is pure") {
  const auto arch = make_arch({2, 7, 4}, Activation::tanh);
  const ParameterVector theta = init_params(arch, 5);
  const Eigen::VectorXd x = vec({0.1, 0.9});
  const BasisVector a = forward_basis(arch, theta, x);
  const BasisVector b = forward_basis(arch, theta, x);
  CHECK(a == b);
}

TEST_CASE("forward_basis rejects a mismatched input") {
  const auto arch = make_arch({2, 3});
  const ParameterVector theta = ParameterVector::Zero(parameter_count(arch));
  CHECK_THROWS_AS(forward_basis(arch, theta, vec({1.0, 2.0, 3.0})), std::invalid_argument);
}

TEST_CASE("backward with a zero cotangent is zero") {
  const auto arch = make_arch({3, 6, 2}, Activation::tanh);
  const ParameterVector theta = init_params(arch, 11);
  const auto [grad_theta, grad_input] =
      backward(arch, theta, vec({0.3, -0.2, 0.5}), Eigen::VectorXd::Zero(2));
  CHECK(grad_theta.isZero(0.0));
  CHECK(grad_input.isZero(0.0));
}

TEST_CASE("backward matches central finite differences on a tanh network") {
  const auto arch = make_arch({2, 6, 3}, Activation::tanh);
  const ParameterVector theta = init_params(arch, 17);
  const Eigen::VectorXd x = vec({0.35, -0.6});
  auto engine = make_engine(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd cot(3);
  for (int i = 0; i < 3; ++i) cot[i] = normal(engine);

  const auto [grad_theta, grad_input] = backward(arch, theta, x, cot);
  const double h = 1e-5;
  const auto scalar = [&](const ParameterVector& t, const Eigen::VectorXd& in) {
    return cot.dot(forward_basis(arch, t, in));
  };

  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    ParameterVector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (scalar(tp, x) - scalar(tm, x)) / (2 * h);
    CHECK(std::abs(grad_theta[i] - fd) <= 1e-5 * std::max({std::abs(fd), std::abs(grad_theta[i]), 1e-3}));
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (scalar(theta, xp) - scalar(theta, xm)) / (2 * h);
    CHECK(std::abs(grad_input[i] - fd) <= 1e-5 * std::max({std::abs(fd), std::abs(grad_input[i]), 1e-3}));
  }
}

TEST_CASE("grad_input is the transpose-weight action when relu stays in its linear region") {
  // Positive weights, biases and inputs keep every pre-activation positive,
  // so relu acts as the identity and the network is the affine map W x + b.
  const auto arch = make_arch({2, 3}, Activation::relu);
  ParameterVector theta = ParameterVector::Zero(parameter_count(arch));
  Eigen::MatrixXd w(3, 2);
  w << 0.5, 1.0, 2.0, 0.25, 1.5, 0.75;
  for (int r = 0; r < 3; ++r) {
    theta[bias_offset(arch, 0, r)] = 0.1;
    for (int c = 0; c < 2; ++c) theta[weight_offset(arch, 0, r, c)] = w(r, c);
  }
  const Eigen::VectorXd x = vec({0.3, 0.6});
  const Eigen::VectorXd cot = vec({1.0, -2.0, 0.5});
  const auto [grad_theta, grad_input] = backward(arch, theta, x, cot);
  const Eigen::VectorXd expected = w.transpose() * cot;
  CHECK(grad_input.isApprox(expected, 1e-14));
}

TEST_CASE("relu backward uses subgradient zero exactly at the kink") {
  // One unit with zero weight and bias: pre-activation is exactly 0, so the
  // cotangent must not flow back through it.
  const auto arch = make_arch({1, 1}, Activation::relu);
  const ParameterVector theta = ParameterVector::Zero(parameter_count(arch));
  const auto [grad_theta, grad_input] = backward(arch, theta, vec({0.7}), vec({1.0}));
  CHECK(grad_theta.isZero(0.0));
  CHECK(grad_input[0] == 0.0);
}

TEST_CASE("backward rejects a mismatched cotangent") {
  const auto arch = make_arch({2, 3});
  const ParameterVector theta = ParameterVector::Zero(parameter_count(arch));
  CHECK_THROWS_AS(backward(arch, theta, vec({1.0, 2.0}), vec({1.0})), std::invalid_argument);
}

TEST_CASE("validate_architecture rejects degenerate shapes") {
  CHECK_THROWS_AS(validate_architecture(make_arch({3})), std::invalid_argument);
  CHECK_THROWS_AS(validate_architecture(make_arch({3, 0})), std::invalid_argument);
  CHECK_NOTHROW(validate_architecture(make_arch({3, 1})));
}
