#include <cmath>
#include <cstdint>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfbo/acquisition.hpp"
#include "mfbo/belief.hpp"
#include "mfbo/bo.hpp"
#include "mfbo/harness.hpp"
#include "mfbo/quadrature.hpp"
#include "mfbo/rng.hpp"
#include "mfbo/surrogate.hpp"
#include "mfbo/tasks.hpp"
#include "mfbo/version.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config_error = 1;
constexpr int exit_runtime_error = 2;

bool check(bool ok, const std::string& label) {
  std::cout << (ok ? "pass" : "FAIL") << "  " << label << '\n';
  return ok;
}

// Evaluates every printed optimum point of every benchmark and probes the
// domain to confirm nothing exceeds the printed maximum.
bool run_bench_check() {
  bool all_ok = true;
  for (const std::string& name : {"branin", "park1", "levy"}) {
    const mfbo::BlackBoxTask task = mfbo::make_task(name);
    std::cout << name << ": fidelities=" << task.fidelities
              << " optimum=" << *task.optimum_value << '\n';
    for (const Eigen::VectorXd& point : task.optimum_points) {
      const double value = task.evaluate(task.fidelities, point);
      const double gap = std::abs(value - *task.optimum_value);
      std::cout << "  at (" << point.transpose() << "): " << value << " |gap|=" << gap << '\n';
      all_ok = check(gap <= 1e-3, name + " optimum value") && all_ok;
    }
    auto engine = mfbo::make_engine(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10000; ++i) {
      Eigen::VectorXd x(task.domain.dim());
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        x[k] = task.domain.lower[k] + task.domain.width()[k] * unit(engine);
      }
      best = std::max(best, task.evaluate(task.fidelities, x));
    }
    all_ok = check(best <= *task.optimum_value + 1e-3,
                   name + " probe sweep stays below the optimum") &&
             all_ok;
  }
  return all_ok;
}

bool run_selftest() {
  bool all_ok = true;

  // Gauss-Hermite rules integrate polynomials of degree 2K-1 exactly; compare
  // against the moment expansion E[(mu+sd z)^k] with positive coefficients so
  // the reference has no cancellation.
  for (const int order : {2, 5, 20}) {
    const mfbo::QuadratureRule rule = mfbo::gauss_hermite_rule(order);
    auto engine = mfbo::make_engine(31 + static_cast<std::uint64_t>(order));
    std::uniform_real_distribution<double> coeff(0.5, 1.5);
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
      const int degree = 2 * order - 1;
      std::vector<double> coeffs(static_cast<std::size_t>(degree) + 1);
      for (double& c : coeffs) c = coeff(engine);
      const double mean = coeff(engine);
      const double sd = coeff(engine);
      auto poly = [&coeffs](double t) {
        double value = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 0;) value = value * t + coeffs[k];
        return value;
      };
      // E[(mean+sd z)^k] = sum over even j of C(k,j) mean^(k-j) sd^j (j-1)!!.
      double expected = 0.0;
      for (std::size_t k = 0; k < coeffs.size(); ++k) {
        double moment_k = 0.0;
        double gauss_moment = 1.0;  // (j-1)!! built incrementally
        for (std::size_t j = 0; j <= k; j += 2) {
          if (j >= 2) gauss_moment *= static_cast<double>(j - 1);
          double binom = 1.0;
          for (std::size_t i = 0; i < j; ++i) {
            binom *= static_cast<double>(k - i) / static_cast<double>(i + 1);
          }
          moment_k += binom * std::pow(mean, static_cast<double>(k - j)) *
                      std::pow(sd, static_cast<double>(j)) * gauss_moment;
        }
        expected += coeffs[k] * moment_k;
      }
      const double got = mfbo::gaussian_expectation(poly, mean, sd * sd, rule);
      ok = ok && std::abs(got - expected) <= 1e-9 * std::abs(expected);
    }
    all_ok = check(ok, "quadrature exactness, order " + std::to_string(order)) && all_ok;
  }

  // Closed-form KL values.
  {
    const double zero = mfbo::kl_to_prior(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
    Eigen::VectorXd mu(1);
    mu << 0.0;
    Eigen::MatrixXd chol(1, 1);
    chol << 2.0;
    const double wide = mfbo::kl_to_prior(mu, chol);
    all_ok = check(std::abs(zero) < 1e-15, "KL at the prior is zero") && all_ok;
    all_ok = check(std::abs(wide - 0.5 * (4.0 - 1.0 - std::log(4.0))) < 1e-12,
                   "KL closed form, 1-D") &&
             all_ok;
  }

  // Entropy constants.
  {
    const double half_gaussian = mfbo::truncated_entropy_top(mfbo::GaussianBelief{0.0, 1.0}, 0.0);
    all_ok = check(std::abs(mfbo::gaussian_entropy(1.0) - 1.4189385332046727) < 1e-12,
                   "unit Gaussian entropy") &&
             all_ok;
    all_ok = check(std::abs(half_gaussian - 0.7257913526447274) < 1e-9,
                   "half-Gaussian truncated entropy") &&
             all_ok;
  }

  // Propagated beliefs stay positive-variance and deterministic.
  {
    bool ok = true;
    const mfbo::QuadratureRule rule = mfbo::gauss_hermite_rule(10);
    auto engine = mfbo::make_engine(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200 && ok; ++trial) {
      const int fidelities = 2 + trial % 2;
      std::vector<mfbo::NetworkArchitecture> archs;
      for (int m = 0; m < fidelities; ++m) {
        archs.push_back({{m == 0 ? 2 : 3, 8, 6}, mfbo::Activation::tanh});
      }
      mfbo::MultiFidelityModel model =
          mfbo::make_model(mfbo::BoxDomain::unit(2), archs, mfbo::derive_seed(11, trial));
      for (auto& layer : model.layers) {
        for (Eigen::Index i = 0; i < layer.mu.size(); ++i) {
          layer.mu[i] = normal(engine);
          for (Eigen::Index j = 0; j < i; ++j) layer.chol(i, j) = 0.3 * normal(engine);
          layer.chol(i, i) = 0.2 + unit(engine);
        }
      }
      Eigen::VectorXd x(2);
      x << unit(engine), unit(engine);
      const auto beliefs = mfbo::output_posteriors(model, x, rule);
      const auto repeat = mfbo::output_posteriors(model, x, rule);
      for (std::size_t m = 0; m < beliefs.size(); ++m) {
        ok = ok && beliefs[m].eta > 0.0 && std::isfinite(beliefs[m].alpha);
        ok = ok && beliefs[m].alpha == repeat[m].alpha && beliefs[m].eta == repeat[m].eta;
      }
    }
    all_ok = check(ok, "belief propagation positive and repeatable") && all_ok;
  }

  // Reparameterized sampling is deterministic per seed.
  {
    std::vector<mfbo::NetworkArchitecture> archs = {{{2, 8, 4}, mfbo::Activation::tanh},
                                                    {{3, 8, 4}, mfbo::Activation::tanh}};
    const mfbo::MultiFidelityModel model =
        mfbo::make_model(mfbo::BoxDomain::unit(2), archs, 5);
    const mfbo::WeightSample a = mfbo::sample_weights(model, 123);
    const mfbo::WeightSample b = mfbo::sample_weights(model, 123);
    bool ok = true;
    for (std::size_t m = 0; m < a.weights.size(); ++m) {
      ok = ok && a.weights[m] == b.weights[m];
    }
    all_ok = check(ok, "weight sampling deterministic per seed") && all_ok;
  }

  all_ok = run_bench_check() && all_ok;
  return all_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-fidelity Bayesian optimization with a stacked Bayesian-output network "
               "surrogate and cost-weighted max-value entropy search"};
  app.set_version_flag("--version", mfbo::version_string);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds_override;
  CLI::App* run_cmd = app.add_subcommand("run", "Run an experiment from a config file");
  run_cmd->add_option("config", config_path, "Path to the experiment config")->required();
  run_cmd->add_option("--out", out_dir, "Output directory for traces and summaries")->required();
  run_cmd->add_option("--seeds", seeds_override, "Comma-separated seed list overriding the config");

  CLI::App* bench_cmd =
      app.add_subcommand("bench-check", "Evaluate the benchmark optima table");
  CLI::App* selftest_cmd = app.add_subcommand("selftest", "Run the built-in property suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? exit_ok : exit_config_error;
  }

  try {
    if (run_cmd->parsed()) {
      mfbo::HarnessConfig cfg;
      try {
        cfg = mfbo::parse_config(config_path);
        if (!seeds_override.empty()) {
          cfg.seeds.clear();
          std::stringstream stream(seeds_override);
          std::string item;
          while (std::getline(stream, item, ',')) {
            const long seed = std::stol(item);
            if (seed < 0) throw std::invalid_argument("seeds must be nonnegative");
            cfg.seeds.push_back(static_cast<std::uint64_t>(seed));
          }
          if (cfg.seeds.empty()) throw std::invalid_argument("empty seed list");
        }
      } catch (const std::exception& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return exit_config_error;
      }
      const mfbo::RunManifest manifest = mfbo::run_experiment(cfg, out_dir);
      std::cout << "wrote " << manifest.artifacts.size() << " artifacts to " << manifest.out_dir
                << " (config " << manifest.config_hash << ")\n";
      for (const auto& [seed, message] : manifest.errors) {
        std::cerr << "seed " << seed << " failed: " << message << '\n';
      }
      return manifest.ok ? exit_ok : exit_runtime_error;
    }
    if (bench_cmd->parsed()) {
      return run_bench_check() ? exit_ok : exit_runtime_error;
    }
    if (selftest_cmd->parsed()) {
      return run_selftest() ? exit_ok : exit_runtime_error;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_runtime_error;
  }
  return exit_ok;
}
