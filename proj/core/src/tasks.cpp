#include "mfbo/tasks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mfbo {

namespace {

constexpr double pi = std::numbers::pi;

void check_point(const BoxDomain& domain, const Eigen::VectorXd& x, const char* task) {
  if (x.size() != domain.dim()) {
    throw std::invalid_argument(std::string(task) + " expects a " + std::to_string(domain.dim()) +
                                "-dimensional input");
  }
  if (!domain.contains(x)) {
    throw std::invalid_argument(std::string(task) + " input outside the domain");
  }
}

void check_fidelity(int fidelity, int count, const char* task) {
  if (fidelity < 1 || fidelity > count) {
    throw std::invalid_argument(std::string(task) + " fidelity must lie in [1, " +
                                std::to_string(count) + "]");
  }
}

// The fidelity formulas reference each other at affinely mapped inputs that
// may leave the query domain; these cores evaluate the raw expressions on all
// of R^d and the domain check applies only to the caller's point.
double branin_f3(double x1, double x2) {
  const double inner = -1.275 * x1 * x1 / (pi * pi) + 5.0 * x1 / pi + x2 - 6.0;
  return -inner * inner - (10.0 - 5.0 / (4.0 * pi)) * std::cos(x1) - 10.0;
}

double branin_f2(double x1, double x2) {
  return -10.0 * std::sqrt(-branin_f3(x1 - 2.0, x2 - 2.0)) - 2.0 * (x1 - 0.5) +
         3.0 * (3.0 * x2 - 1.0) + 1.0;
}

double branin_f1(double x1, double x2) {
  return -branin_f2(1.2 * (x1 + 2.0), 1.2 * (x2 + 2.0)) + 3.0 * x2 - 1.0;
}

double levy_f3(double x1, double x2) {
  const double s1 = std::sin(3.0 * pi * x1);
  const double s2 = std::sin(3.0 * pi * x2);
  const double s3 = std::sin(2.0 * pi * x2);
  return -s1 * s1 - (x1 - 1.0) * (x1 - 1.0) * (1.0 + s2 * s2) -
         (x2 - 1.0) * (x2 - 1.0) * (1.0 + s3 * s3);
}

double park1_f2(const Eigen::VectorXd& x) {
  const double x1 = std::max(x[0], 1e-6);
  const double root = std::sqrt(1.0 + (x[1] + x[2] * x[2]) * x[3] / (x1 * x1));
  return 0.5 * x1 * (root - 1.0) + (x1 + 3.0 * x[3]) * std::exp(1.0 + std::sin(x[2]));
}

BoxDomain make_domain(std::initializer_list<double> lower, std::initializer_list<double> upper) {
  BoxDomain domain;
  domain.lower = Eigen::Map<const Eigen::VectorXd>(lower.begin(),
                                                   static_cast<Eigen::Index>(lower.size()));
  domain.upper = Eigen::Map<const Eigen::VectorXd>(upper.begin(),
                                                   static_cast<Eigen::Index>(upper.size()));
  return domain;
}

Eigen::VectorXd make_point(std::initializer_list<double> values) {
  return Eigen::Map<const Eigen::VectorXd>(values.begin(),
                                           static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void validate_task(const BlackBoxTask& task) {
  if (task.fidelities < 1) {
    throw std::invalid_argument("task needs at least one fidelity");
  }
  validate_domain(task.domain);
  validate_costs(task.costs, task.fidelities);
  for (int m = 2; m <= task.fidelities; ++m) {
    if (!(task.costs.cost(m) > task.costs.cost(m - 1))) {
      throw std::invalid_argument("query costs must increase with fidelity");
    }
  }
  if (!task.evaluate) {
    throw std::invalid_argument("task has no evaluator");
  }
}

double branin_mf(int fidelity, const Eigen::VectorXd& x) {
  check_fidelity(fidelity, 3, "branin");
  static const BoxDomain domain = make_domain({-5.0, 0.0}, {10.0, 15.0});
  check_point(domain, x, "branin");
  switch (fidelity) {
    case 1: return branin_f1(x[0], x[1]);
    case 2: return branin_f2(x[0], x[1]);
    default: return branin_f3(x[0], x[1]);
  }
}

double park1_mf(int fidelity, const Eigen::VectorXd& x) {
  check_fidelity(fidelity, 2, "park1");
  static const BoxDomain domain = make_domain({0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0});
  check_point(domain, x, "park1");
  const double high = park1_f2(x);
  if (fidelity == 2) return high;
  return (1.0 + std::sin(x[0]) / 10.0) * high - 2.0 * x[0] + x[1] * x[1] + x[2] * x[2] + 0.5;
}

double levy_mf(int fidelity, const Eigen::VectorXd& x) {
  check_fidelity(fidelity, 3, "levy");
  static const BoxDomain domain = make_domain({-10.0, -10.0}, {10.0, 10.0});
  check_point(domain, x, "levy");
  const double high = levy_f3(x[0], x[1]);
  switch (fidelity) {
    case 3: return high;
    case 2: return -std::exp(0.1 * std::sqrt(-high)) - 0.1 * std::sqrt(1.0 + high * high);
    default: return -std::sqrt(1.0 + high * high);
  }
}

BlackBoxTask make_task(const std::string& name) {
  BlackBoxTask task;
  task.name = name;
  if (name == "branin") {
    task.fidelities = 3;
    task.domain = make_domain({-5.0, 0.0}, {10.0, 15.0});
    task.costs = CostModel{{1.0, 10.0, 100.0}};
    task.evaluate = branin_mf;
    task.optimum_value = -0.3979;
    task.optimum_points = {make_point({-pi, 12.275}), make_point({pi, 2.275}),
                           make_point({9.425, 2.475})};
  } else if (name == "park1") {
    task.fidelities = 2;
    task.domain = make_domain({0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0});
    task.costs = CostModel{{1.0, 10.0}};
    task.evaluate = park1_mf;
    task.optimum_value = 25.5893;
    task.optimum_points = {make_point({1.0, 1.0, 1.0, 1.0})};
  } else if (name == "levy") {
    task.fidelities = 3;
    task.domain = make_domain({-10.0, -10.0}, {10.0, 10.0});
    task.costs = CostModel{{1.0, 10.0, 100.0}};
    task.evaluate = levy_mf;
    task.optimum_value = 0.0;
    task.optimum_points = {make_point({1.0, 1.0})};
  } else {
    throw std::invalid_argument("unknown task '" + name + "'");
  }
  validate_task(task);
  return task;
}

}  // namespace mfbo
