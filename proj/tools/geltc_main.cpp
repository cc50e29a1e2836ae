#include <cstdlib>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "geltc/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

void apply_overrides(std::vector<geltc::ExperimentConfig>& configs, const std::string& output_dir,
                     const std::optional<std::size_t>& workers) {
  for (auto& c : configs) {
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (workers) c.workers = *workers;
  }
}

int run_all(const std::string& path, geltc::ExperimentMode mode, const std::string& output_dir,
            const std::optional<std::size_t>& workers, bool quiet) {
  auto configs = geltc::load_config(path);
  apply_overrides(configs, output_dir, workers);
  for (const auto& config : configs) {
    std::cout << "running " << config.id << " (" << config.replications << " replications, T=" << config.horizon
              << ")\n";
    const auto summary = geltc::run_experiment(config, mode, quiet ? nullptr : &std::cerr);
    geltc::print_summary(std::cout, summary);
  }
  return kOk;
}

int validate(const std::string& path) {
  const auto configs = geltc::load_config(path);
  for (const auto& config : configs) {
    const auto d = geltc::derive(config);
    std::cout << config.id << ": structure " << geltc::to_string(config.structure.kind) << ", dims "
              << geltc::to_string(config.dims) << ", T " << config.horizon << '\n'
              << std::setprecision(6) << "  width " << d.width.mean << " (se " << d.width.std_error << ", "
              << d.width.samples << " samples)\n"
              << "  phi " << d.phi << '\n'
              << "  T1 " << d.t1 << '\n'
              << "  lambda " << d.lambda << '\n'
              << "  B_T " << d.bound_at_horizon << '\n';
  }
  return kOk;
}

int selftest() {
  int failed = 0;
  for (const auto& check : geltc::run_selftest()) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name;
    if (!check.passed) {
      std::cout << ": " << check.detail;
      ++failed;
    }
    std::cout << '\n';
  }
  std::cout << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed") << '\n';
  return failed ? kFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explore-then-commit bandits with structured tensor parameters"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(geltc::kVersion));

  std::string config_path, output_dir;
  std::optional<std::size_t> workers;
  bool quiet = false;

  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--output-dir", output_dir, "Override the configured output directory");
    sub->add_option("--workers", workers, "Override the replication worker count");
    sub->add_flag("--quiet", quiet, "Suppress per-replication progress");
  };

  auto* run = app.add_subcommand("run", "Run the experiments in a config");
  add_run_options(run);
  auto* compare = app.add_subcommand("compare-lasso", "Run G-ELTC against the DR-Lasso bandit on a sparse vector config");
  add_run_options(compare);
  auto* check = app.add_subcommand("validate", "Parse a config and print derived T1, lambda and width");
  check->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* self = app.add_subcommand("selftest", "Run the fast invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*run) return run_all(config_path, geltc::ExperimentMode::Geltc, output_dir, workers, quiet);
    if (*compare) return run_all(config_path, geltc::ExperimentMode::CompareLasso, output_dir, workers, quiet);
    if (*check) return validate(config_path);
    if (*self) return selftest();
  } catch (const geltc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
