#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "geltc/bandit.hpp"
#include "geltc/estimator.hpp"

namespace geltc {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kVersion = "0.3.0";

/// Bad config content (unknown key, invalid enum, out-of-range value) or
/// malformed JSON. `what()` is a single line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string id;
  RegularizerSpec structure;
  Dims dims;
  std::size_t arms = 20;
  std::size_t horizon = 1000;
  GlmFamily family;
  ContextModel contexts;
  double delta = 0.01;
  double c_explore = 1.0;
  double c_lambda = 1.0;
  /// Overrides the default context scale 1/sqrt(prod d) in the lambda schedule.
  std::optional<double> k;
  std::size_t replications = 10;
  std::size_t width_samples = 200;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "results";
  /// Replication worker threads; 0 means hardware concurrency.
  std::size_t workers = 0;
  FitOptions fit;
  DrLassoConfig drlasso;
  /// The experiment's JSON after defaults were merged, echoed into the manifest.
  nlohmann::json source;

  LambdaSchedule lambda_schedule() const;
};

/// Accepts either one experiment object or {"experiments": [...], "defaults": {...}}.
std::vector<ExperimentConfig> parse_config(const nlohmann::json& doc);
std::vector<ExperimentConfig> load_config(const std::filesystem::path& path);

/// Quantities fixed before any replication runs.
struct DerivedQuantities {
  WidthEstimate width;
  double phi = 0.0;
  std::size_t t1 = 0;
  double lambda = 0.0;
  double bound_at_horizon = 0.0;
};

DerivedQuantities derive(const ExperimentConfig& config);

enum class ExperimentMode { Geltc, CompareLasso };

struct AlgorithmSummary {
  std::string algorithm;
  std::vector<double> final_regrets;
  double final_mean = 0.0;
  double final_std = 0.0;
  double final_ratio_mean = 0.0;
};

struct ExperimentSummary {
  std::string id;
  DerivedQuantities derived;
  std::vector<AlgorithmSummary> algorithms;
  std::filesystem::path summary_csv;
  std::filesystem::path reps_csv;
  std::filesystem::path manifest;
  double wall_seconds = 0.0;

  const AlgorithmSummary& algorithm(const std::string& name) const;
};

/// Per-replication seed: derive_seed(base_seed, k).
std::uint64_t replication_seed(const ExperimentConfig& config, std::size_t replication);

/// Runs every replication (in a bounded worker pool), then writes
/// <id>_summary.csv, <id>_reps.csv and <id>_manifest.json to the output dir.
ExperimentSummary run_experiment(const ExperimentConfig& config, ExperimentMode mode = ExperimentMode::Geltc,
                                 std::ostream* log = nullptr);

void print_summary(std::ostream& os, const ExperimentSummary& summary);

/// Header rows of the two CSV files.
inline constexpr const char* kSummaryHeader = "algorithm,round,mean_cum_regret,std_cum_regret,mean_ratio,std_ratio";
inline constexpr const char* kRepsHeader =
    "algorithm,replication,replication_seed,t1,lambda,width,final_cum_regret,final_ratio,fit_iterations,"
    "fit_objective,fit_stationarity,fit_converged,nonconverged_fits";

/// Shortest round-trip decimal form.
std::string format_double(double value);

struct SelfCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant checks over every module.
std::vector<SelfCheck> run_selftest();

}  // namespace geltc
