#include "mfbo/bo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "mfbo/belief.hpp"
#include "mfbo/rng.hpp"

namespace mfbo {

namespace {

constexpr double duplicate_tolerance = 1e-9;
constexpr double jitter_scale = 1e-3;

double best_top_value(const Dataset& data, int top) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [x, y] : data.observations[static_cast<std::size_t>(top - 1)]) {
    best = std::max(best, y);
  }
  return best;
}

// Moves x away from any coincident same-fidelity point so retraining never
// sees an exact duplicate.
Eigen::VectorXd dedupe_point(const Dataset& data, int fidelity, Eigen::VectorXd x,
                             const BoxDomain& domain, std::uint64_t rng_seed) {
  const auto& level = data.observations[static_cast<std::size_t>(fidelity - 1)];
  const bool duplicate =
      std::any_of(level.begin(), level.end(), [&x](const auto& point) {
        return (point.first - x).template lpNorm<Eigen::Infinity>() < duplicate_tolerance;
      });
  if (!duplicate) return x;
  auto engine = make_engine(rng_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] += jitter_scale * domain.width()[i] * unit(engine);
  }
  return domain.clamp(x);
}

}  // namespace

void validate_experiment(const ExperimentConfig& cfg) {
  const BlackBoxTask task = make_task(cfg.task);
  if (!(cfg.budget > 0.0)) {
    throw std::invalid_argument("budget must be positive");
  }
  if (static_cast<int>(cfg.init_counts.size()) != task.fidelities) {
    throw std::invalid_argument("init_counts needs one entry per fidelity");
  }
  int total = 0;
  for (const int count : cfg.init_counts) {
    if (count < 0) throw std::invalid_argument("init_counts must be nonnegative");
    total += count;
  }
  if (total == 0) {
    throw std::invalid_argument("initial design needs at least one point");
  }
  if (static_cast<int>(cfg.archs.size()) != task.fidelities) {
    throw std::invalid_argument("need one architecture per fidelity");
  }
  const int d = task.domain.dim();
  for (std::size_t m = 0; m < cfg.archs.size(); ++m) {
    validate_architecture(cfg.archs[m]);
    const int expected = m == 0 ? d : d + 1;
    if (cfg.archs[m].input_dim() != expected) {
      throw std::invalid_argument("architecture " + std::to_string(m + 1) +
                                  " must take input width " + std::to_string(expected));
    }
  }
  if (cfg.costs) validate_costs(*cfg.costs, task.fidelities);
  if (cfg.quad_order < 1) throw std::invalid_argument("quad_order must be positive");
  if (cfg.n_max_samples < 1) throw std::invalid_argument("n_max_samples must be positive");
  if (cfg.max_iterations && *cfg.max_iterations < 0) {
    throw std::invalid_argument("max_iterations must be nonnegative");
  }
}

Dataset initial_design(const BlackBoxTask& task, const std::vector<int>& counts,
                       std::uint64_t rng_seed) {
  if (static_cast<int>(counts.size()) != task.fidelities) {
    throw std::invalid_argument("need one count per fidelity");
  }
  auto engine = make_engine(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset data(task.fidelities);
  const int d = task.domain.dim();
  for (int m = 1; m <= task.fidelities; ++m) {
    for (int i = 0; i < counts[static_cast<std::size_t>(m - 1)]; ++i) {
      Eigen::VectorXd x(d);
      for (int k = 0; k < d; ++k) {
        x[k] = task.domain.lower[k] + task.domain.width()[k] * unit(engine);
      }
      data.add(m, x, task.evaluate(m, x));
    }
  }
  return data;
}

double simple_regret(const BlackBoxTask& task, const RunTrace& trace) {
  if (!task.optimum_value) {
    throw std::invalid_argument("task '" + task.name + "' has no known optimum");
  }
  double best = best_top_value(trace.initial_design_data, task.fidelities);
  for (const TraceRecord& record : trace.records) {
    if (record.fidelity == task.fidelities) best = std::max(best, record.y);
  }
  if (!std::isfinite(best)) return std::numeric_limits<double>::infinity();
  return *task.optimum_value - best;
}

double inference_regret(const BlackBoxTask& task, const MultiFidelityModel& model,
                        const LbfgsConfig& lbfgs_cfg, const QuadratureRule& rule,
                        std::uint64_t rng_seed) {
  if (!task.optimum_value) {
    throw std::invalid_argument("task '" + task.name + "' has no known optimum");
  }
  const int top = model.fidelities();
  auto mean_fn = [&model, &rule, top](const Eigen::VectorXd& x) {
    return output_posteriors(model, x, rule)[static_cast<std::size_t>(top - 1)].alpha;
  };
  ObjectiveWithGrad objective = finite_difference_objective(mean_fn, task.domain, 1e-5);
  const OptimResult result = lbfgs_maximize(objective, task.domain, lbfgs_cfg, rng_seed);
  return *task.optimum_value - result.value;
}

RunTrace bo_run(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  const BlackBoxTask task = make_task(cfg.task);
  const CostModel costs = cfg.costs ? *cfg.costs : task.costs;
  const int top = task.fidelities;
  const QuadratureRule rule = gauss_hermite_rule(cfg.quad_order);

  RunTrace trace;
  trace.config = cfg;
  trace.initial_design_data = initial_design(task, cfg.init_counts, derive_seed(cfg.seed, 1));
  Dataset data = trace.initial_design_data;
  MultiFidelityModel model = make_model(task.domain, cfg.archs, derive_seed(cfg.seed, 2));
  trace.final_model = model;

  try {
    model = train(model, data, TrainOptions{cfg.adam_init, 1, derive_seed(cfg.seed, 3)}).model;
  } catch (const std::exception& err) {
    trace.error = std::string("initial training failed: ") + err.what();
    return trace;
  }
  trace.final_model = model;

  double best_top = best_top_value(data, top);
  const double min_cost = *std::min_element(costs.lambdas.begin(), costs.lambdas.end());
  double cum_cost = 0.0;

  for (int t = 1;; ++t) {
    if (cfg.max_iterations && t > *cfg.max_iterations) break;
    if (cum_cost + min_cost > cfg.budget) break;
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t base = 4 * static_cast<std::uint64_t>(t) + 10;

    TraceRecord record;
    record.iteration = t;
    try {
      const MaxValueSamples fstars = sample_max_values(
          model, task.domain, cfg.n_max_samples, cfg.lbfgs, derive_seed(cfg.seed, base));
      const AcquisitionResult acq =
          maximize_acquisition(model, costs, fstars, task.domain, cfg.lbfgs, rule,
                               derive_seed(cfg.seed, base + 1));
      if (cum_cost + costs.cost(acq.fidelity) > cfg.budget) break;
      record.x = dedupe_point(data, acq.fidelity, acq.x, task.domain,
                              derive_seed(cfg.seed, base + 2));
      record.fidelity = acq.fidelity;
      record.acq_score = acq.score;
      record.y = task.evaluate(record.fidelity, record.x);
      data.add(record.fidelity, record.x, record.y);
      cum_cost += costs.cost(record.fidelity);
      record.cum_cost = cum_cost;
      if (record.fidelity == top) best_top = std::max(best_top, record.y);

      model = train(reset_variational(model), data,
                    TrainOptions{cfg.adam_retrain, 1, derive_seed(cfg.seed, base + 3)})
                  .model;
      trace.final_model = model;

      record.simple_regret = std::isfinite(best_top)
                                 ? *task.optimum_value - best_top
                                 : std::numeric_limits<double>::infinity();
      record.inference_regret =
          inference_regret(task, model, cfg.lbfgs, rule, derive_seed(cfg.seed, base + 4));
    } catch (const std::exception& err) {
      trace.error = "iteration " + std::to_string(t) + " failed: " + err.what();
      break;
    }
    record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    trace.records.push_back(std::move(record));
  }
  return trace;
}

}  // namespace mfbo
