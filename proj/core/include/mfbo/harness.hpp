#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mfbo/bo.hpp"

namespace mfbo {

/// A parsed experiment file: the per-run settings plus the seed list (one
/// bo_run per seed).
struct HarnessConfig {
  ExperimentConfig experiment;
  std::vector<std::uint64_t> seeds;
};

/// Parses a flat "key: value" text config. Recognized keys: task, budget,
/// seeds (count or comma list), init_counts, costs, arch_1..arch_M
/// ("depth x width", e.g. 3x40), activation, lr, epochs_init, epochs_retrain,
/// quad_order, n_max_samples, lbfgs_restarts. Unknown keys, duplicates, and
/// malformed values raise errors naming the key and line; missing optional
/// keys fall back to documented defaults.
HarnessConfig parse_config(const std::string& path);

/// Same grammar, parsing from text directly (path used in messages).
HarnessConfig parse_config_text(const std::string& text, const std::string& origin);

/// Canonical text form; parse_config_text(serialize_config(c)) reproduces c.
std::string serialize_config(const HarnessConfig& cfg);

/// Record of one run_experiment invocation and its artifacts.
struct RunManifest {
  std::string version;
  std::string config_hash;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> artifacts;       // paths relative to out_dir
  std::map<std::uint64_t, std::string> errors;  // per-seed failure reasons
  bool ok = false;
};

/// Writes one trace CSV with the fixed header
/// iteration,fidelity,x_1..x_d,y,acq_score,cum_cost,simple_regret,inference_regret.
/// Unbounded simple regret is an empty field.
void write_trace_csv(const RunTrace& trace, std::ostream& out);

/// Long-format regret curve across traces: seed,cumulative_cost,
/// simple_regret,inference_regret, one row per BO iteration.
void emit_regret_curve(const std::vector<RunTrace>& traces, const std::string& out_path);

/// Runs bo_run for every seed on a bounded worker pool (size from the
/// MFBO_WORKERS environment variable, default: hardware concurrency), writing
/// trace_seed<seed>.csv per seed plus regret_curve.csv, summary.json, and
/// manifest.json into out_dir. ok is true iff every seed completed cleanly.
RunManifest run_experiment(const HarnessConfig& cfg, const std::string& out_dir);

}  // namespace mfbo
