#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfbo/acquisition.hpp"
#include "mfbo/cost.hpp"
#include "mfbo/optim.hpp"
#include "mfbo/quadrature.hpp"
#include "mfbo/surrogate.hpp"
#include "mfbo/tasks.hpp"

namespace mfbo {

/// Everything one optimization run needs. The budget covers acquisition-driven
/// queries only; the initial design is excluded from cost accounting.
struct ExperimentConfig {
  std::string task;
  std::vector<int> init_counts;
  double budget = 0.0;
  std::optional<CostModel> costs;  // overrides the task's costs when set
  std::vector<NetworkArchitecture> archs;
  AdamConfig adam_init;
  AdamConfig adam_retrain;
  LbfgsConfig lbfgs;
  int quad_order = 10;
  int n_max_samples = 10;
  std::uint64_t seed = 0;
  std::optional<int> max_iterations;  // optional cap on BO iterations
};

void validate_experiment(const ExperimentConfig& cfg);

/// One acquisition-driven query and the run state after it.
struct TraceRecord {
  int iteration = 0;
  Eigen::VectorXd x;
  int fidelity = 0;
  double y = 0.0;
  double acq_score = 0.0;
  double cum_cost = 0.0;
  double simple_regret = 0.0;     // +inf until a top-fidelity query exists
  double inference_regret = 0.0;
  double wall_time_s = 0.0;
};

/// Full artifact of one run. `error` is empty on clean completion; on
/// training or acquisition failure it holds the reason and the records
/// gathered so far remain valid.
struct RunTrace {
  ExperimentConfig config;
  Dataset initial_design_data;
  std::vector<TraceRecord> records;
  MultiFidelityModel final_model;
  std::string error;
};

/// Uniform-random inputs per fidelity, evaluated on the task. Deterministic
/// per seed.
Dataset initial_design(const BlackBoxTask& task, const std::vector<int>& counts,
                       std::uint64_t rng_seed);

/// Gap between the known optimum and the best top-fidelity query anywhere in
/// the trace (initial design included); +inf if no top-fidelity query exists.
double simple_regret(const BlackBoxTask& task, const RunTrace& trace);

/// Gap between the known optimum and the maximum of the surrogate's
/// top-fidelity posterior mean, found by multi-start L-BFGS.
double inference_regret(const BlackBoxTask& task, const MultiFidelityModel& model,
                        const LbfgsConfig& lbfgs_cfg, const QuadratureRule& rule,
                        std::uint64_t rng_seed);

/// The full optimization loop: train on the initial design, then repeatedly
/// sample max values, maximize the cost-weighted information gain, query,
/// and retrain, until the chosen query's cost would exceed the remaining
/// budget. Failures truncate the trace instead of propagating.
RunTrace bo_run(const ExperimentConfig& cfg);

}  // namespace mfbo
