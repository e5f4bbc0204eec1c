#include "mfbo/optim.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>
#include <string>

#include "mfbo/rng.hpp"

namespace mfbo {

using Eigen::VectorXd;

bool BoxDomain::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  }
  return true;
}

BoxDomain BoxDomain::unit(int dim) {
  return {VectorXd::Zero(dim), VectorXd::Ones(dim)};
}

void validate_domain(const BoxDomain& domain) {
  if (domain.lower.size() != domain.upper.size() || domain.lower.size() == 0) {
    throw std::invalid_argument("domain bounds have mismatched or zero dimension");
  }
  for (Eigen::Index i = 0; i < domain.lower.size(); ++i) {
    if (!(domain.lower[i] < domain.upper[i])) {
      throw std::invalid_argument("domain requires lower < upper in every dimension");
    }
  }
}

AdamState::AdamState(Eigen::Index n, AdamConfig cfg)
    : config(cfg), first_moment(VectorXd::Zero(n)), second_moment(VectorXd::Zero(n)) {}

void AdamState::step(Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
  ++t;
  first_moment = config.beta1 * first_moment + (1.0 - config.beta1) * grad;
  second_moment =
      config.beta2 * second_moment.array() + (1.0 - config.beta2) * grad.array().square();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  x.array() -= config.learning_rate * (first_moment.array() / c1) /
               ((second_moment.array() / c2).sqrt() + config.epsilon);
}

OptimResult adam_minimize(const ObjectiveWithGrad& objective, const Eigen::VectorXd& init,
                          const AdamConfig& cfg) {
  if (cfg.learning_rate <= 0.0 || cfg.max_epochs < 1) {
    throw std::invalid_argument("adam config requires learning_rate > 0 and max_epochs >= 1");
  }
  VectorXd x = init;
  VectorXd grad(x.size());
  AdamState state(x.size(), cfg);

  VectorXd best_x = x;
  double best_value = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch <= cfg.max_epochs; ++epoch) {
    const double value = objective(x, grad);
    if (!std::isfinite(value) || !grad.allFinite()) {
      throw std::runtime_error("adam_minimize: non-finite objective or gradient at epoch " +
                               std::to_string(epoch));
    }
    if (value < best_value) {
      best_value = value;
      best_x = x;
    }
    if (epoch == cfg.max_epochs) break;
    state.step(x, grad);
  }
  return {std::move(best_x), best_value, cfg.max_epochs};
}

namespace {

struct LbfgsHistory {
  std::deque<VectorXd> s;
  std::deque<VectorXd> y;
  std::deque<double> rho;

  void push(const VectorXd& step, const VectorXd& grad_diff, int memory) {
    const double sy = step.dot(grad_diff);
    if (sy <= 1e-12 * step.norm() * grad_diff.norm()) return;  // curvature guard
    s.push_back(step);
    y.push_back(grad_diff);
    rho.push_back(1.0 / sy);
    while (static_cast<int>(s.size()) > memory) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  // Two-loop recursion: approximate H * grad.
  VectorXd direction(const VectorXd& grad) const {
    VectorXd q = grad;
    const int k = static_cast<int>(s.size());
    std::vector<double> alpha(k);
    for (int i = k - 1; i >= 0; --i) {
      alpha[i] = rho[i] * s[i].dot(q);
      q -= alpha[i] * y[i];
    }
    if (k > 0) {
      const double gamma = s[k - 1].dot(y[k - 1]) / y[k - 1].squaredNorm();
      q *= gamma;
    }
    for (int i = 0; i < k; ++i) {
      const double beta = rho[i] * y[i].dot(q);
      q += (alpha[i] - beta) * s[i];
    }
    return q;
  }
};

constexpr double armijo_slope = 1e-4;
constexpr double armijo_contraction = 0.5;

// Projected L-BFGS descent on f (the caller negates to maximize). Tracks the
// best iterate; returns false if nothing finite was ever evaluated.
bool lbfgs_descend(const ObjectiveWithGrad& objective, const BoxDomain& domain,
                   const LbfgsConfig& cfg, VectorXd x, VectorXd& best_x, double& best_value) {
  VectorXd grad(x.size());
  double value = objective(x, grad);
  bool any_finite = false;
  if (!std::isfinite(value) || !grad.allFinite()) return false;
  any_finite = true;
  if (value < best_value) {
    best_value = value;
    best_x = x;
  }

  LbfgsHistory history;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double projected_norm = (domain.clamp(x - grad) - x).lpNorm<Eigen::Infinity>();
    if (projected_norm <= cfg.grad_tol) break;

    VectorXd direction = -history.direction(grad);
    if (direction.dot(grad) >= 0.0 || !direction.allFinite()) {
      direction = -grad;  // fall back to steepest descent
    }

    double alpha = 1.0;
    if (history.s.empty()) {
      const double gnorm = grad.norm();
      if (gnorm > 1.0) alpha = 1.0 / gnorm;
    }
    bool accepted = false;
    VectorXd candidate;
    double candidate_value = 0.0;
    VectorXd candidate_grad(x.size());
    while (alpha > 1e-16) {
      candidate = domain.clamp(x + alpha * direction);
      const VectorXd displacement = candidate - x;
      if (displacement.lpNorm<Eigen::Infinity>() < 1e-18) break;
      candidate_value = objective(candidate, candidate_grad);
      if (std::isfinite(candidate_value) && candidate_grad.allFinite() &&
          candidate_value <= value + armijo_slope * grad.dot(displacement)) {
        accepted = true;
        break;
      }
      alpha *= armijo_contraction;
    }
    if (!accepted) break;

    history.push(candidate - x, candidate_grad - grad, cfg.memory);
    x = std::move(candidate);
    value = candidate_value;
    grad = candidate_grad;
    if (value < best_value) {
      best_value = value;
      best_x = x;
    }
  }
  return any_finite;
}

}  // namespace

OptimResult lbfgs_maximize(const ObjectiveWithGrad& objective, const BoxDomain& domain,
                           const LbfgsConfig& cfg, std::uint64_t rng_seed) {
  validate_domain(domain);
  if (cfg.memory < 1 || cfg.grad_tol <= 0.0 || cfg.restarts < 1) {
    throw std::invalid_argument("lbfgs config requires memory >= 1, grad_tol > 0, restarts >= 1");
  }

  ObjectiveWithGrad negated = [&objective](const VectorXd& x, VectorXd& grad) {
    const double value = objective(x, grad);
    grad = -grad;
    return -value;
  };

  auto engine = make_engine(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  VectorXd best_x = domain.lower;
  double best_value = std::numeric_limits<double>::infinity();
  bool any_finite = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    VectorXd start(domain.dim());
    for (int i = 0; i < domain.dim(); ++i) {
      start[i] = domain.lower[i] + unit(engine) * (domain.upper[i] - domain.lower[i]);
    }
    any_finite |= lbfgs_descend(negated, domain, cfg, std::move(start), best_x, best_value);
  }
  if (!any_finite) {
    throw std::runtime_error("lbfgs_maximize: objective non-finite on every restart");
  }
  return {std::move(best_x), -best_value, cfg.max_iters};
}

ObjectiveWithGrad finite_difference_objective(const std::function<double(const Eigen::VectorXd&)>& f,
                                              const BoxDomain& domain, double h_rel) {
  const VectorXd h = h_rel * domain.width();
  return [f, h](const VectorXd& x, VectorXd& grad) {
    grad.resize(x.size());
    VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      probe[i] = x[i] + h[i];
      const double plus = f(probe);
      probe[i] = x[i] - h[i];
      const double minus = f(probe);
      probe[i] = x[i];
      grad[i] = (plus - minus) / (2.0 * h[i]);
    }
    return f(x);
  };
}

}  // namespace mfbo
