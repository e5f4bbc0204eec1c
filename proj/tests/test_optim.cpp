#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfbo/optim.hpp"
#include "test_common.hpp"

using namespace mfbo;
using mfbo::testing::vec;

namespace {

BoxDomain box1d(double lo, double hi) {
  BoxDomain d;
  d.lower = vec({lo});
  d.upper = vec({hi});
  return d;
}

}  // namespace

TEST_CASE("adam drives a centered quadratic below 1e-3") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.max_epochs = 2000;
  const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = 2.0 * x;
    return x.squaredNorm();
  };
  const OptimResult res = adam_minimize(objective, vec({1.0}), cfg);
  CHECK(std::abs(res.x[0]) < 1e-3);
}

TEST_CASE("adam leaves a constant objective untouched") {
  AdamConfig cfg;
  cfg.max_epochs = 500;
  const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = Eigen::VectorXd::Zero(x.size());
    return 4.2;
  };
  const OptimResult res = adam_minimize(objective, vec({0.3, -0.7}), cfg);
  CHECK(res.x[0] == 0.3);
  CHECK(res.x[1] == -0.7);
  CHECK(res.value == 4.2);
}

TEST_CASE("adam converges to a shifted minimum") {
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 4000;
  const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = vec({2.0 * (x[0] - 3.0)});
    return (x[0] - 3.0) * (x[0] - 3.0);
  };
  const OptimResult res = adam_minimize(objective, vec({0.0}), cfg);
  CHECK(std::abs(res.x[0] - 3.0) < 1e-2);
}

TEST_CASE("adam reports the epoch when the objective turns non-finite") {
  AdamConfig cfg;
  cfg.learning_rate = 1.0;
  cfg.max_epochs = 100;
  int calls = 0;
  const auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = vec({1.0});
    ++calls;
    return calls >= 5 ? std::numeric_limits<double>::quiet_NaN() : x[0];
  };
  CHECK_THROWS_WITH_AS(adam_minimize(objective, vec({0.0}), cfg),
                       doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("adam never returns a value above the best evaluated iterate") {
  AdamConfig cfg;
  cfg.learning_rate = 0.3;  // deliberately large so iterates oscillate
  cfg.max_epochs = 50;
  double best_seen = std::numeric_limits<double>::infinity();
  const auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = 2.0 * x;
    const double v = x.squaredNorm();
    best_seen = std::min(best_seen, v);
    return v;
  };
  const OptimResult res = adam_minimize(objective, vec({2.0}), cfg);
  CHECK(res.value <= best_seen + 1e-15);
}

TEST_CASE("lbfgs finds an interior maximum to 1e-6") {
  LbfgsConfig cfg;
  const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = vec({-2.0 * (x[0] - 0.5)});
    return -(x[0] - 0.5) * (x[0] - 0.5);
  };
  const OptimResult res = lbfgs_maximize(objective, box1d(0.0, 1.0), cfg, 3);
  CHECK(std::abs(res.x[0] - 0.5) < 1e-6);
}

TEST_CASE("lbfgs reaches the Rosenbrock optimum within 1e-4") {
  LbfgsConfig cfg;
  cfg.restarts = 10;
  cfg.max_iters = 400;
  BoxDomain box;
  box.lower = vec({-2.0, -2.0});
  box.upper = vec({2.0, 2.0});
  const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    grad = vec({2.0 * a + 400.0 * b * x[0], -200.0 * b});
    return -(a * a + 100.0 * b * b);
  };
  const OptimResult res = lbfgs_maximize(objective, box, cfg, 7);
  CHECK(res.value > -1e-4);
  CHECK(std::abs(res.x[0] - 1.0) < 0.05);
  CHECK(std::abs(res.x[1] - 1.0) < 0.05);
}

TEST_CASE("lbfgs projects a linear objective onto the boundary") {
  LbfgsConfig cfg;
  const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = vec({1.0});
    return x[0];
  };
  const OptimResult res = lbfgs_maximize(objective, box1d(0.0, 1.0), cfg, 5);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lbfgs output stays inside the box and is deterministic") {
  LbfgsConfig cfg;
  cfg.restarts = 4;
  BoxDomain box;
  box.lower = vec({-1.0, 0.0});
  box.upper = vec({2.0, 0.5});
  const auto objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = vec({std::cos(3.0 * x[0]) * 3.0, -2.0 * x[1]});
    return std::sin(3.0 * x[0]) - x[1] * x[1];
  };
  const OptimResult a = lbfgs_maximize(objective, box, cfg, 11);
  const OptimResult b = lbfgs_maximize(objective, box, cfg, 11);
  CHECK(box.contains(a.x));
  CHECK(a.x == b.x);
  CHECK(a.value == b.value);
}

TEST_CASE("lbfgs never returns below the best evaluated iterate") {
  LbfgsConfig cfg;
  cfg.restarts = 3;
  double best_seen = -std::numeric_limits<double>::infinity();
  const auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = vec({-std::sin(x[0]) - 2.0 * x[0] * 0.1});
    const double v = std::cos(x[0]) - 0.1 * x[0] * x[0];
    best_seen = std::max(best_seen, v);
    return v;
  };
  const OptimResult res = lbfgs_maximize(objective, box1d(-4.0, 4.0), cfg, 21);
  CHECK(res.value >= best_seen - 1e-15);
}

TEST_CASE("lbfgs errors when every restart is non-finite") {
  LbfgsConfig cfg;
  cfg.restarts = 3;
  const auto objective = [](const Eigen::VectorXd&, Eigen::VectorXd& grad) {
    grad = vec({0.0});
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(lbfgs_maximize(objective, box1d(0.0, 1.0), cfg, 1), std::runtime_error);
}

TEST_CASE("finite differences recover an analytic gradient") {
  BoxDomain box;
  box.lower = vec({0.0, 0.0});
  box.upper = vec({1.0, 2.0});
  const auto f = [](const Eigen::VectorXd& x) {
    return x[0] * x[0] + 3.0 * x[0] * x[1] - x[1];
  };
  const ObjectiveWithGrad wrapped = finite_difference_objective(f, box, 1e-5);
  const Eigen::VectorXd x = vec({0.4, 1.1});
  Eigen::VectorXd grad(2);
  const double value = wrapped(x, grad);
  CHECK(value == doctest::Approx(f(x)).epsilon(1e-15));
  CHECK(grad[0] == doctest::Approx(2.0 * 0.4 + 3.0 * 1.1).epsilon(1e-7));
  CHECK(grad[1] == doctest::Approx(3.0 * 0.4 - 1.0).epsilon(1e-7));
}

TEST_CASE("box helpers clamp and validate") {
  BoxDomain box;
  box.lower = vec({0.0});
  box.upper = vec({1.0});
  CHECK(box.clamp(vec({2.0}))[0] == 1.0);
  CHECK(box.contains(vec({0.5})));
  CHECK_FALSE(box.contains(vec({1.5})));
  BoxDomain bad;
  bad.lower = vec({1.0});
  bad.upper = vec({0.0});
  CHECK_THROWS_AS(validate_domain(bad), std::invalid_argument);
}
