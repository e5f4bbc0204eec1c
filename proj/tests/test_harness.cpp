#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mfbo/harness.hpp"
#include "test_common.hpp"

using namespace mfbo;
using mfbo::testing::vec;

namespace {

template <typename Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& err) {
    return err.what();
  }
  return "";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::filesystem::path fresh_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  return dir;
}

HarnessConfig tiny_park1_harness() {
  return parse_config_text(
      "task: park1\n"
      "budget: 12\n"
      "seeds: 1,2\n"
      "init_counts: 3,2\n"
      "arch_1: 1x8\n"
      "arch_2: 1x8\n"
      "epochs_init: 120\n"
      "epochs_retrain: 60\n"
      "quad_order: 6\n"
      "n_max_samples: 3\n"
      "lbfgs_restarts: 2\n",
      "tiny");
}

}  // namespace

TEST_CASE("a minimal config fills every documented default") {
  const HarnessConfig cfg = parse_config_text("task: park1\nbudget: 150\nseeds: 5\n", "inline");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  const ExperimentConfig& exp = cfg.experiment;
  CHECK(exp.task == "park1");
  CHECK(exp.budget == 150.0);
  CHECK(exp.init_counts == std::vector<int>{5, 2});
  CHECK_FALSE(exp.costs.has_value());
  REQUIRE(exp.archs.size() == 2);
  CHECK(exp.archs[0].layer_widths == std::vector<int>{4, 40, 40, 40});
  CHECK(exp.archs[1].layer_widths == std::vector<int>{5, 40, 40, 40});
  CHECK(exp.archs[0].activation == Activation::tanh);
  CHECK(exp.adam_init.learning_rate == 1e-2);
  CHECK(exp.adam_retrain.learning_rate == 1e-2);
  CHECK(exp.adam_init.max_epochs == 3000);
  CHECK(exp.adam_retrain.max_epochs == 1000);
  CHECK(exp.quad_order == 10);
  CHECK(exp.n_max_samples == 10);
  CHECK(exp.lbfgs.restarts == 10);

  const HarnessConfig branin = parse_config_text("task: branin\nbudget: 10\nseeds: 1\n", "inline");
  CHECK(branin.experiment.init_counts == std::vector<int>{20, 20, 2});
  REQUIRE(branin.experiment.archs.size() == 3);
  CHECK(branin.experiment.archs[0].layer_widths.front() == 2);
  CHECK(branin.experiment.archs[1].layer_widths.front() == 3);
  CHECK(branin.experiment.archs[2].layer_widths.front() == 3);
}

TEST_CASE("explicit keys override the defaults and round-trip through serialization") {
  const std::string text =
      "task: branin\n"
      "budget: 75.5\n"
      "# a comment line\n"
      "seeds: 3, 7, 11\n"
      "init_counts: 4,3,1\n"
      "costs: 1, 10, 100\n"
      "arch_1: 2x16\n"
      "arch_3: 1x4\n"
      "activation: relu\n"
      "lr: 0.005\n"
      "epochs_init: 200\n"
      "epochs_retrain: 90\n"
      "quad_order: 8\n"
      "n_max_samples: 4\n"
      "lbfgs_restarts: 3\n";
  const HarnessConfig cfg = parse_config_text(text, "inline");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 7, 11});
  const ExperimentConfig& exp = cfg.experiment;
  CHECK(exp.init_counts == std::vector<int>{4, 3, 1});
  REQUIRE(exp.costs.has_value());
  CHECK(exp.costs->lambdas == std::vector<double>{1.0, 10.0, 100.0});
  CHECK(exp.archs[0].layer_widths == std::vector<int>{2, 16, 16});
  CHECK(exp.archs[1].layer_widths == std::vector<int>{3, 40, 40, 40});  // untouched default
  CHECK(exp.archs[2].layer_widths == std::vector<int>{3, 4});
  CHECK(exp.archs[1].activation == Activation::relu);
  CHECK(exp.adam_retrain.learning_rate == 0.005);
  CHECK(exp.adam_init.max_epochs == 200);
  CHECK(exp.adam_retrain.max_epochs == 90);
  CHECK(exp.quad_order == 8);
  CHECK(exp.n_max_samples == 4);
  CHECK(exp.lbfgs.restarts == 3);

  const HarnessConfig reparsed = parse_config_text(serialize_config(cfg), "roundtrip");
  CHECK(reparsed.seeds == cfg.seeds);
  CHECK(reparsed.experiment.task == exp.task);
  CHECK(reparsed.experiment.budget == exp.budget);
  CHECK(reparsed.experiment.init_counts == exp.init_counts);
  CHECK(reparsed.experiment.costs->lambdas == exp.costs->lambdas);
  for (std::size_t m = 0; m < exp.archs.size(); ++m) {
    CHECK(reparsed.experiment.archs[m].layer_widths == exp.archs[m].layer_widths);
    CHECK(reparsed.experiment.archs[m].activation == exp.archs[m].activation);
  }
  CHECK(reparsed.experiment.adam_init.learning_rate == exp.adam_init.learning_rate);
  CHECK(reparsed.experiment.adam_init.max_epochs == exp.adam_init.max_epochs);
  CHECK(reparsed.experiment.adam_retrain.max_epochs == exp.adam_retrain.max_epochs);
  CHECK(reparsed.experiment.quad_order == exp.quad_order);
  CHECK(reparsed.experiment.n_max_samples == exp.n_max_samples);
  CHECK(reparsed.experiment.lbfgs.restarts == exp.lbfgs.restarts);
  CHECK(serialize_config(reparsed) == serialize_config(cfg));
}

TEST_CASE("config errors name the offending key and line") {
  const std::string base = "task: park1\nbudget: 150\nseeds: 5\n";

  std::string msg = error_message([&] { parse_config_text(base + "frobnicate: 3\n", "cfg"); });
  CHECK(msg.find("frobnicate") != std::string::npos);
  CHECK(msg.find("cfg:4") != std::string::npos);

  msg = error_message([&] { parse_config_text("task: park1\nbudget: soon\nseeds: 5\n", "cfg"); });
  CHECK(msg.find("budget") != std::string::npos);
  CHECK(msg.find("cfg:2") != std::string::npos);

  msg = error_message([&] { parse_config_text(base + "budget: 10\n", "cfg"); });
  CHECK(msg.find("duplicate") != std::string::npos);

  msg = error_message([&] { parse_config_text("task: park1\nseeds: 5\n", "cfg"); });
  CHECK(msg.find("budget") != std::string::npos);

  msg = error_message([&] { parse_config_text("task: nessie\nbudget: 1\nseeds: 5\n", "cfg"); });
  CHECK(msg.find("nessie") != std::string::npos);

  msg = error_message([&] { parse_config_text(base + "init_counts: 1,2,3\n", "cfg"); });
  CHECK(msg.find("init_counts") != std::string::npos);

  msg = error_message([&] { parse_config_text(base + "arch_3: 2x8\n", "cfg"); });
  CHECK(msg.find("arch_3") != std::string::npos);

  msg = error_message([&] { parse_config_text(base + "activation: sigmoid\n", "cfg"); });
  CHECK(msg.find("activation") != std::string::npos);

  msg = error_message([&] { parse_config_text(base + "costs: -1,10\n", "cfg"); });
  CHECK(msg.find("cfg:4") != std::string::npos);

  msg = error_message([&] { parse_config_text(base + "costs: 1,10,100\n", "cfg"); });
  CHECK(msg.find("cfg:4") != std::string::npos);

  CHECK_THROWS_AS(parse_config("/nonexistent/mfbo.cfg"), std::invalid_argument);
}

TEST_CASE("trace CSV uses the fixed header and an empty field for unbounded regret") {
  RunTrace trace;
  trace.config.task = "park1";
  TraceRecord first;
  first.iteration = 1;
  first.fidelity = 1;
  first.x = vec({0.5, 0.25, 1.0, 0.125});
  first.y = -3.5;
  first.acq_score = 0.75;
  first.cum_cost = 1.0;
  first.simple_regret = std::numeric_limits<double>::infinity();
  first.inference_regret = 2.5;
  TraceRecord second = first;
  second.iteration = 2;
  second.fidelity = 2;
  second.cum_cost = 11.0;
  second.simple_regret = 0.5;
  trace.records = {first, second};

  std::ostringstream out;
  write_trace_csv(trace, out);
  std::istringstream lines(out.str());
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "iteration,fidelity,x_1,x_2,x_3,x_4,y,acq_score,cum_cost,simple_regret,inference_regret");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "1,1,0.5,0.25,1,0.125,-3.5,0.75,1,,2.5");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "2,2,0.5,0.25,1,0.125,-3.5,0.75,11,0.5,2.5");
  CHECK_FALSE(std::getline(lines, line));
}

TEST_CASE("regret curve stacks every trace in long format") {
  RunTrace a;
  a.config.task = "park1";
  a.config.seed = 7;
  TraceRecord rec;
  rec.iteration = 1;
  rec.fidelity = 2;
  rec.x = vec({0.1, 0.2, 0.3, 0.4});
  rec.cum_cost = 10.0;
  rec.simple_regret = 1.5;
  rec.inference_regret = 0.25;
  a.records = {rec};
  RunTrace b = a;
  b.config.seed = 9;
  rec.iteration = 2;
  rec.cum_cost = 20.0;
  rec.simple_regret = 0.5;
  b.records.push_back(rec);

  const auto path = fresh_dir("mfbo_regret_curve_test");
  std::filesystem::create_directories(path);
  const std::string file = (path / "curve.csv").string();
  emit_regret_curve({a, b}, file);
  std::istringstream lines(read_file(file));
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "seed,cumulative_cost,simple_regret,inference_regret");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "7,10,1.5,0.25");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "9,10,1.5,0.25");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "9,20,0.5,0.25");
  CHECK_FALSE(std::getline(lines, line));

  CHECK_THROWS_AS(emit_regret_curve({}, file), std::invalid_argument);
  std::filesystem::remove_all(path);
}

TEST_CASE("run_experiment writes every artifact and a consistent summary") {
  const HarnessConfig cfg = tiny_park1_harness();
  const auto dir = fresh_dir("mfbo_run_experiment_test");
  const RunManifest manifest = run_experiment(cfg, dir.string());

  CHECK(manifest.ok);
  CHECK(manifest.errors.empty());
  CHECK(manifest.seeds == cfg.seeds);
  CHECK(manifest.out_dir == dir.string());
  CHECK(manifest.config_hash.size() == 16);
  for (const std::string& name :
       {"trace_seed1.csv", "trace_seed2.csv", "regret_curve.csv", "summary.json", "manifest.json"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(dir / name));
    CHECK(std::count(manifest.artifacts.begin(), manifest.artifacts.end(), name) == 1);
  }

  const nlohmann::json summary = nlohmann::json::parse(read_file(dir / "summary.json"));
  CHECK(summary.at("task") == "park1");
  CHECK(summary.at("budget") == 12.0);
  REQUIRE(summary.at("per_seed").size() == 2);
  double sr_sum = 0.0;
  for (const auto& entry : summary.at("per_seed")) {
    CHECK(entry.at("error").get<std::string>().empty());
    CHECK(entry.at("iterations").get<int>() >= 1);
    REQUIRE(entry.at("final_simple_regret").is_number());
    sr_sum += entry.at("final_simple_regret").get<double>();
  }
  CHECK(summary.at("final_simple_regret").at("mean").get<double>() ==
        doctest::Approx(sr_sum / 2.0).epsilon(1e-12));

  const nlohmann::json mf = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(mf.at("ok") == true);
  CHECK(mf.at("config_hash") == manifest.config_hash);
  CHECK(mf.at("seeds").size() == 2);

  SUBCASE("a re-run reproduces byte-identical trace CSVs") {
    const auto dir2 = fresh_dir("mfbo_run_experiment_test_replay");
    const RunManifest replay = run_experiment(cfg, dir2.string());
    CHECK(replay.ok);
    CHECK(read_file(dir / "trace_seed1.csv") == read_file(dir2 / "trace_seed1.csv"));
    CHECK(read_file(dir / "trace_seed2.csv") == read_file(dir2 / "trace_seed2.csv"));
    CHECK(read_file(dir / "regret_curve.csv") == read_file(dir2 / "regret_curve.csv"));
    std::filesystem::remove_all(dir2);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("a failing seed is recorded in the manifest instead of thrown") {
  HarnessConfig cfg = tiny_park1_harness();
  cfg.seeds = {1};
  cfg.experiment.adam_init.learning_rate = 1e18;
  const auto dir = fresh_dir("mfbo_run_experiment_error_test");
  const RunManifest manifest = run_experiment(cfg, dir.string());
  CHECK_FALSE(manifest.ok);
  REQUIRE(manifest.errors.count(1) == 1);
  CHECK_FALSE(manifest.errors.at(1).empty());
  CHECK(std::filesystem::exists(dir / "trace_seed1.csv"));
  std::filesystem::remove_all(dir);
}
