#include "mfbo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "mfbo/version.hpp"

namespace mfbo {

namespace {

std::string format_double(double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

[[noreturn]] void config_error(const std::string& origin, int line, const std::string& message) {
  throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + message);
}

struct RawEntry {
  std::string value;
  int line = 0;
};

double parse_number(const std::string& text, const std::string& origin, int line,
                    const std::string& key) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    config_error(origin, line, "key '" + key + "' needs a number, got '" + text + "'");
  }
}

long parse_integer(const std::string& text, const std::string& origin, int line,
                   const std::string& key) {
  try {
    std::size_t used = 0;
    const long value = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    config_error(origin, line, "key '" + key + "' needs an integer, got '" + text + "'");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) parts.push_back(trim(item));
  return parts;
}

// "depth x width" architecture shorthand: depth hidden layers of equal width.
std::pair<int, int> parse_arch_spec(const std::string& text, const std::string& origin, int line,
                                    const std::string& key) {
  const auto cross = text.find('x');
  if (cross == std::string::npos) {
    config_error(origin, line, "key '" + key + "' needs the form <depth>x<width>");
  }
  const long depth = parse_integer(trim(text.substr(0, cross)), origin, line, key);
  const long width = parse_integer(trim(text.substr(cross + 1)), origin, line, key);
  if (depth < 1 || width < 1) {
    config_error(origin, line, "key '" + key + "' needs positive depth and width");
  }
  return {static_cast<int>(depth), static_cast<int>(width)};
}

NetworkArchitecture build_arch(int input_dim, int depth, int width, Activation activation) {
  NetworkArchitecture arch;
  arch.layer_widths.push_back(input_dim);
  arch.layer_widths.insert(arch.layer_widths.end(), static_cast<std::size_t>(depth), width);
  arch.activation = activation;
  return arch;
}

std::vector<int> default_init_counts(const BlackBoxTask& task) {
  if (task.fidelities == 2) return {5, 2};
  return {20, 20, 2};
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex_string(std::uint64_t value) {
  char buffer[17];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + 16, value, 16);
  std::string text(buffer, ptr);
  return std::string(16 - text.size(), '0') + text;
}

nlohmann::json finite_or_null(double value) {
  if (std::isfinite(value)) return value;
  return nullptr;
}

int worker_pool_size(std::size_t n_seeds) {
  std::size_t workers = std::max<unsigned>(std::thread::hardware_concurrency(), 1);
  if (const char* env = std::getenv("MFBO_WORKERS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) workers = static_cast<std::size_t>(parsed);
  }
  return static_cast<int>(std::min(workers, std::max<std::size_t>(n_seeds, 1)));
}

}  // namespace

HarnessConfig parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, RawEntry> entries;
  std::istringstream stream(text);
  std::string raw_line;
  int line_no = 0;
  while (std::getline(stream, raw_line)) {
    ++line_no;
    const auto comment = raw_line.find('#');
    if (comment != std::string::npos) raw_line.erase(comment);
    const std::string line = trim(raw_line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      config_error(origin, line_no, "expected 'key: value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key.empty() || value.empty()) {
      config_error(origin, line_no, "expected 'key: value', got '" + line + "'");
    }
    if (entries.count(key) != 0) {
      config_error(origin, line_no, "duplicate key '" + key + "'");
    }
    entries[key] = RawEntry{value, line_no};
  }

  for (const std::string& required : {"task", "budget", "seeds"}) {
    if (entries.count(required) == 0) {
      throw std::invalid_argument(origin + ": missing required key '" + required + "'");
    }
  }

  auto take = [&entries](const std::string& key) -> const RawEntry* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };

  HarnessConfig cfg;
  ExperimentConfig& exp = cfg.experiment;

  const RawEntry& task_entry = entries.at("task");
  exp.task = task_entry.value;
  BlackBoxTask task;
  try {
    task = make_task(exp.task);
  } catch (const std::exception&) {
    config_error(origin, task_entry.line, "unknown task '" + exp.task + "'");
  }
  const int n_fidelities = task.fidelities;
  const int d = task.domain.dim();

  const RawEntry& budget_entry = entries.at("budget");
  exp.budget = parse_number(budget_entry.value, origin, budget_entry.line, "budget");
  if (!(exp.budget > 0.0)) {
    config_error(origin, budget_entry.line, "budget must be positive");
  }

  const RawEntry& seeds_entry = entries.at("seeds");
  const std::vector<std::string> seed_parts = split_list(seeds_entry.value);
  if (seed_parts.size() == 1) {
    const long count = parse_integer(seed_parts[0], origin, seeds_entry.line, "seeds");
    if (count < 1) config_error(origin, seeds_entry.line, "seed count must be positive");
    for (long s = 1; s <= count; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    for (const std::string& part : seed_parts) {
      const long seed = parse_integer(part, origin, seeds_entry.line, "seeds");
      if (seed < 0) config_error(origin, seeds_entry.line, "seeds must be nonnegative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(seed));
    }
  }

  if (const RawEntry* entry = take("init_counts")) {
    for (const std::string& part : split_list(entry->value)) {
      const long count = parse_integer(part, origin, entry->line, "init_counts");
      if (count < 0) config_error(origin, entry->line, "init_counts must be nonnegative");
      exp.init_counts.push_back(static_cast<int>(count));
    }
    if (static_cast<int>(exp.init_counts.size()) != n_fidelities) {
      config_error(origin, entry->line,
                   "init_counts needs " + std::to_string(n_fidelities) + " entries");
    }
  } else {
    exp.init_counts = default_init_counts(task);
  }

  if (const RawEntry* entry = take("costs")) {
    CostModel costs;
    for (const std::string& part : split_list(entry->value)) {
      costs.lambdas.push_back(parse_number(part, origin, entry->line, "costs"));
    }
    try {
      validate_costs(costs, n_fidelities);
    } catch (const std::exception& err) {
      config_error(origin, entry->line, err.what());
    }
    exp.costs = std::move(costs);
  }

  Activation activation = Activation::tanh;
  if (const RawEntry* entry = take("activation")) {
    if (entry->value == "relu") {
      activation = Activation::relu;
    } else if (entry->value == "tanh") {
      activation = Activation::tanh;
    } else {
      config_error(origin, entry->line, "activation must be relu or tanh");
    }
  }

  std::vector<std::pair<int, int>> shapes(static_cast<std::size_t>(n_fidelities), {3, 40});
  for (int m = 1; m <= n_fidelities; ++m) {
    const std::string key = "arch_" + std::to_string(m);
    if (const RawEntry* entry = take(key)) {
      shapes[static_cast<std::size_t>(m - 1)] =
          parse_arch_spec(entry->value, origin, entry->line, key);
    }
  }
  for (int m = 1; m <= n_fidelities; ++m) {
    const auto [depth, width] = shapes[static_cast<std::size_t>(m - 1)];
    exp.archs.push_back(build_arch(m == 1 ? d : d + 1, depth, width, activation));
  }

  double lr = 1e-2;
  if (const RawEntry* entry = take("lr")) {
    lr = parse_number(entry->value, origin, entry->line, "lr");
    if (!(lr > 0.0)) config_error(origin, entry->line, "lr must be positive");
  }
  long epochs_init = 3000;
  if (const RawEntry* entry = take("epochs_init")) {
    epochs_init = parse_integer(entry->value, origin, entry->line, "epochs_init");
    if (epochs_init < 1) config_error(origin, entry->line, "epochs_init must be positive");
  }
  long epochs_retrain = 1000;
  if (const RawEntry* entry = take("epochs_retrain")) {
    epochs_retrain = parse_integer(entry->value, origin, entry->line, "epochs_retrain");
    if (epochs_retrain < 1) config_error(origin, entry->line, "epochs_retrain must be positive");
  }
  exp.adam_init.learning_rate = lr;
  exp.adam_init.max_epochs = static_cast<int>(epochs_init);
  exp.adam_retrain.learning_rate = lr;
  exp.adam_retrain.max_epochs = static_cast<int>(epochs_retrain);

  if (const RawEntry* entry = take("quad_order")) {
    const long order = parse_integer(entry->value, origin, entry->line, "quad_order");
    if (order < 1) config_error(origin, entry->line, "quad_order must be positive");
    exp.quad_order = static_cast<int>(order);
  }
  if (const RawEntry* entry = take("n_max_samples")) {
    const long count = parse_integer(entry->value, origin, entry->line, "n_max_samples");
    if (count < 1) config_error(origin, entry->line, "n_max_samples must be positive");
    exp.n_max_samples = static_cast<int>(count);
  }
  if (const RawEntry* entry = take("lbfgs_restarts")) {
    const long restarts = parse_integer(entry->value, origin, entry->line, "lbfgs_restarts");
    if (restarts < 1) config_error(origin, entry->line, "lbfgs_restarts must be positive");
    exp.lbfgs.restarts = static_cast<int>(restarts);
  }

  static const std::vector<std::string> known = {
      "task",       "budget",      "seeds",          "init_counts",
      "costs",      "activation",  "lr",             "epochs_init",
      "epochs_retrain", "quad_order", "n_max_samples", "lbfgs_restarts"};
  for (const auto& [key, entry] : entries) {
    if (std::find(known.begin(), known.end(), key) != known.end()) continue;
    if (key.rfind("arch_", 0) == 0) {
      const std::string suffix = key.substr(5);
      bool numeric = !suffix.empty() &&
                     std::all_of(suffix.begin(), suffix.end(),
                                 [](unsigned char c) { return std::isdigit(c); });
      if (numeric) {
        const long m = std::stol(suffix);
        if (m >= 1 && m <= n_fidelities) continue;
        config_error(origin, entry.line,
                     "key '" + key + "' exceeds the task's " + std::to_string(n_fidelities) +
                         " fidelities");
      }
    }
    config_error(origin, entry.line, "unknown key '" + key + "'");
  }

  validate_experiment(exp);
  return cfg;
}

HarnessConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

std::string serialize_config(const HarnessConfig& cfg) {
  const ExperimentConfig& exp = cfg.experiment;
  std::ostringstream out;
  out << "task: " << exp.task << '\n';
  out << "budget: " << format_double(exp.budget) << '\n';
  out << "seeds: ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    out << (i == 0 ? "" : ",") << cfg.seeds[i];
  }
  out << '\n';
  out << "init_counts: ";
  for (std::size_t i = 0; i < exp.init_counts.size(); ++i) {
    out << (i == 0 ? "" : ",") << exp.init_counts[i];
  }
  out << '\n';
  if (exp.costs) {
    out << "costs: ";
    for (std::size_t i = 0; i < exp.costs->lambdas.size(); ++i) {
      out << (i == 0 ? "" : ",") << format_double(exp.costs->lambdas[i]);
    }
    out << '\n';
  }
  for (std::size_t m = 0; m < exp.archs.size(); ++m) {
    const auto& widths = exp.archs[m].layer_widths;
    for (std::size_t i = 2; i < widths.size(); ++i) {
      if (widths[i] != widths[1]) {
        throw std::invalid_argument("only uniform-width architectures serialize");
      }
    }
    out << "arch_" << (m + 1) << ": " << (widths.size() - 1) << 'x' << widths[1] << '\n';
  }
  out << "activation: "
      << (exp.archs.empty() || exp.archs.front().activation == Activation::tanh ? "tanh" : "relu")
      << '\n';
  out << "lr: " << format_double(exp.adam_init.learning_rate) << '\n';
  out << "epochs_init: " << exp.adam_init.max_epochs << '\n';
  out << "epochs_retrain: " << exp.adam_retrain.max_epochs << '\n';
  out << "quad_order: " << exp.quad_order << '\n';
  out << "n_max_samples: " << exp.n_max_samples << '\n';
  out << "lbfgs_restarts: " << exp.lbfgs.restarts << '\n';
  return out.str();
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  const int d = make_task(trace.config.task).domain.dim();
  out << "iteration,fidelity";
  for (int k = 1; k <= d; ++k) out << ",x_" << k;
  out << ",y,acq_score,cum_cost,simple_regret,inference_regret\n";
  for (const TraceRecord& record : trace.records) {
    out << record.iteration << ',' << record.fidelity;
    for (Eigen::Index k = 0; k < record.x.size(); ++k) {
      out << ',' << format_double(record.x[k]);
    }
    out << ',' << format_double(record.y) << ',' << format_double(record.acq_score) << ','
        << format_double(record.cum_cost) << ',';
    if (std::isfinite(record.simple_regret)) out << format_double(record.simple_regret);
    out << ',' << format_double(record.inference_regret) << '\n';
  }
}

void emit_regret_curve(const std::vector<RunTrace>& traces, const std::string& out_path) {
  if (traces.empty()) {
    throw std::invalid_argument("regret curve needs at least one trace");
  }
  std::ofstream out(out_path);
  if (!out) {
    throw std::runtime_error("cannot open '" + out_path + "' for writing");
  }
  out << "seed,cumulative_cost,simple_regret,inference_regret\n";
  for (const RunTrace& trace : traces) {
    for (const TraceRecord& record : trace.records) {
      out << trace.config.seed << ',' << format_double(record.cum_cost) << ',';
      if (std::isfinite(record.simple_regret)) out << format_double(record.simple_regret);
      out << ',' << format_double(record.inference_regret) << '\n';
    }
  }
}

RunManifest run_experiment(const HarnessConfig& cfg, const std::string& out_dir) {
  validate_experiment(cfg.experiment);
  if (cfg.seeds.empty()) {
    throw std::invalid_argument("need at least one seed");
  }
  std::filesystem::create_directories(out_dir);

  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<RunTrace> traces(n_seeds);
  std::atomic<std::size_t> next{0};
  const int workers = worker_pool_size(n_seeds);
  auto work = [&cfg, &traces, &next, n_seeds]() {
    for (std::size_t i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
      ExperimentConfig run_cfg = cfg.experiment;
      run_cfg.seed = cfg.seeds[i];
      traces[i] = bo_run(run_cfg);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& thread : pool) thread.join();
  }

  RunManifest manifest;
  manifest.version = version_string;
  manifest.config_hash = hex_string(fnv1a_hash(serialize_config(cfg)));
  manifest.out_dir = out_dir;
  manifest.seeds = cfg.seeds;
  manifest.ok = true;

  const BlackBoxTask task = make_task(cfg.experiment.task);
  nlohmann::json per_seed = nlohmann::json::array();
  double sr_sum = 0.0, sr_sq = 0.0, ir_sum = 0.0, ir_sq = 0.0;
  int sr_n = 0, ir_n = 0;
  for (std::size_t i = 0; i < n_seeds; ++i) {
    const RunTrace& trace = traces[i];
    const std::string csv_name = "trace_seed" + std::to_string(cfg.seeds[i]) + ".csv";
    std::ofstream csv(std::filesystem::path(out_dir) / csv_name);
    if (!csv) throw std::runtime_error("cannot write " + csv_name);
    write_trace_csv(trace, csv);
    manifest.artifacts.push_back(csv_name);

    nlohmann::json entry;
    entry["seed"] = cfg.seeds[i];
    entry["iterations"] = trace.records.size();
    entry["final_cum_cost"] = trace.records.empty() ? 0.0 : trace.records.back().cum_cost;
    double final_sr = std::numeric_limits<double>::infinity();
    if (!trace.records.empty()) {
      final_sr = trace.records.back().simple_regret;
    } else if (task.optimum_value) {
      final_sr = simple_regret(task, trace);
    }
    entry["final_simple_regret"] = finite_or_null(final_sr);
    if (std::isfinite(final_sr)) {
      sr_sum += final_sr;
      sr_sq += final_sr * final_sr;
      ++sr_n;
    }
    if (!trace.records.empty()) {
      const double final_ir = trace.records.back().inference_regret;
      entry["final_inference_regret"] = finite_or_null(final_ir);
      if (std::isfinite(final_ir)) {
        ir_sum += final_ir;
        ir_sq += final_ir * final_ir;
        ++ir_n;
      }
    } else {
      entry["final_inference_regret"] = nullptr;
    }
    entry["error"] = trace.error;
    if (!trace.error.empty()) {
      manifest.errors[cfg.seeds[i]] = trace.error;
      manifest.ok = false;
    }
    per_seed.push_back(std::move(entry));
  }

  emit_regret_curve(traces, (std::filesystem::path(out_dir) / "regret_curve.csv").string());
  manifest.artifacts.push_back("regret_curve.csv");

  nlohmann::json summary;
  summary["task"] = cfg.experiment.task;
  summary["budget"] = cfg.experiment.budget;
  summary["seeds"] = cfg.seeds;
  summary["per_seed"] = std::move(per_seed);
  auto mean_se = [](double sum, double sq, int n) {
    nlohmann::json out;
    if (n == 0) {
      out["mean"] = nullptr;
      out["se"] = nullptr;
      return out;
    }
    const double mean = sum / n;
    out["mean"] = mean;
    if (n >= 2) {
      const double var = std::max((sq - n * mean * mean) / (n - 1), 0.0);
      out["se"] = std::sqrt(var / n);
    } else {
      out["se"] = nullptr;
    }
    return out;
  };
  summary["final_simple_regret"] = mean_se(sr_sum, sr_sq, sr_n);
  summary["final_inference_regret"] = mean_se(ir_sum, ir_sq, ir_n);
  {
    std::ofstream json_out(std::filesystem::path(out_dir) / "summary.json");
    if (!json_out) throw std::runtime_error("cannot write summary.json");
    json_out << summary.dump(2) << '\n';
  }
  manifest.artifacts.push_back("summary.json");

  nlohmann::json manifest_json;
  manifest_json["version"] = manifest.version;
  manifest_json["config_hash"] = manifest.config_hash;
  manifest_json["out_dir"] = manifest.out_dir;
  manifest_json["seeds"] = manifest.seeds;
  manifest_json["artifacts"] = manifest.artifacts;
  nlohmann::json error_json = nlohmann::json::object();
  for (const auto& [seed, message] : manifest.errors) {
    error_json[std::to_string(seed)] = message;
  }
  manifest_json["errors"] = std::move(error_json);
  manifest_json["ok"] = manifest.ok;
  {
    std::ofstream manifest_out(std::filesystem::path(out_dir) / "manifest.json");
    if (!manifest_out) throw std::runtime_error("cannot write manifest.json");
    manifest_out << manifest_json.dump(2) << '\n';
  }
  manifest.artifacts.push_back("manifest.json");

  return manifest;
}

}  // namespace mfbo
