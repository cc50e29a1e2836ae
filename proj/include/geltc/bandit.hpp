#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geltc/estimator.hpp"
#include "geltc/glm.hpp"
#include "geltc/random.hpp"
#include "geltc/regularizer.hpp"
#include "geltc/tensor.hpp"

namespace geltc {

/// How arm contexts are drawn each round.
///
/// - UnitSphere: i.i.d. Gaussian entries, then each context scaled to unit
///   Frobenius norm (uniform on the sphere).
/// - StandardNormal: i.i.d. N(0, 1) entries without rescaling.
/// - Equicorrelated: for every coordinate j the K arm values are jointly
///   Gaussian with unit variance and pairwise correlation rho2.
enum class ContextKind { UnitSphere, StandardNormal, Equicorrelated };

std::string_view to_string(ContextKind kind);
ContextKind parse_context_kind(std::string_view name);

struct ContextModel {
  ContextKind kind = ContextKind::UnitSphere;
  double rho2 = 0.0;
};

/// p x K matrix; column i is the vectorized context of arm i.
Eigen::MatrixXd draw_contexts(const ContextModel& model, std::size_t arms, std::size_t p, Rng& rng);

std::vector<Tensor> gen_context_set(std::size_t arms, const Dims& dims, Rng& rng,
                                    const ContextModel& model = {});

/// Random truth with the declared structure, scaled to unit Frobenius norm.
Tensor gen_true_parameter(const RegularizerSpec& spec, const Dims& dims, Rng& rng);

/// Checks rank / sparsity of `theta` against the rank or sparsity set in `spec`.
bool satisfies_structure(const RegularizerSpec& spec, const Tensor& theta, double tol = 1e-8);

/// Index of the largest score; ties go to the lowest index.
std::size_t argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores);
std::size_t optimal_arm(std::span<const Tensor> contexts, const Tensor& theta);

struct InstanceSeeds {
  std::uint64_t truth = 0;
  std::uint64_t contexts = 0;
  std::uint64_t rewards = 0;
  std::uint64_t policy = 0;

  /// Streams 0..3 of derive_seed(replication_seed, .).
  static InstanceSeeds derive(std::uint64_t replication_seed);
};

struct BanditInstance {
  Dims dims;
  RegularizerSpec structure;
  std::size_t arms = 20;
  std::size_t horizon = 1000;
  GlmFamily family;
  ContextModel contexts;
  Tensor theta_star;
  InstanceSeeds seeds;
};

/// Builds an instance whose truth is drawn from the truth stream.
BanditInstance make_instance(const Dims& dims, const RegularizerSpec& structure, std::size_t arms,
                             std::size_t horizon, const GlmFamily& family, const ContextModel& contexts,
                             const InstanceSeeds& seeds);

struct RunRecord {
  std::string algorithm;
  std::vector<std::uint32_t> chosen_arm;
  std::vector<double> chosen_inner;
  std::vector<double> instantaneous_regret;
  std::vector<double> cumulative_regret;
  std::size_t t1 = 0;
  double lambda = 0.0;
  double width = 0.0;
  FitDiagnostics fit;
  /// Number of estimator solves that missed their tolerance.
  std::size_t nonconverged_fits = 0;
  double wall_seconds = 0.0;
  InstanceSeeds seeds;

  double final_regret() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
};

struct GeltcOptions {
  double c_explore = 1.0;
  FitOptions fit;
  std::size_t width_samples = 200;
  /// Precomputed Gaussian width; estimated from the truth stream when absent.
  std::optional<double> width;
  /// Skips the fit and commits to this estimate (oracle agent).
  std::optional<Tensor> injected_estimate;
};

/// Explore uniformly for T1 rounds, fit the penalized GLM once, then commit
/// greedily for the remaining rounds.
RunRecord run_geltc(const BanditInstance& instance, const LambdaSchedule& schedule,
                    const GeltcOptions& opts = {});

/// Growth rate B_T of the structure's regret bound with constants dropped.
/// `d` is the largest mode size.
double theoretical_bound(const RegularizerSpec& spec, const Dims& dims, double horizon, double delta = 0.01);

/// Sparse vector bandit with equicorrelated arms and Gaussian rewards. The
/// truth has `sparsity` Uniform[0,1] non-zeros and is not rescaled.
BanditInstance gen_lasso_comparison_env(std::size_t arms, std::size_t d, std::size_t sparsity, double rho2,
                                        double noise_sd, std::size_t horizon, Rng& rng);

/// Doubly-robust Lasso bandit hyperparameters.
struct DrLassoConfig {
  /// Exploration mixing scale; the round-t exploration probability is
  /// lambda1 * sqrt((log t + log d) / t).
  double lambda1 = 1.0;
  /// Lasso penalty scale, lambda2 * sqrt((log t + log d) / t).
  double lambda2 = 1.0;
  /// Rounds of pure uniform play before mixing starts.
  std::size_t forced_rounds = 10;
  int max_sweeps = 1000;
  double tol = 1e-8;
};

RunRecord run_drlasso(const BanditInstance& instance, const DrLassoConfig& config = {});

/// Coordinate descent for min_b b'Qb - 2c'b + penalty * ||b||_1, warm-started
/// from `beta`. Returns whether the sweep change fell below tol.
bool lasso_coordinate_descent(const Eigen::MatrixXd& gram, const Eigen::VectorXd& cross, double penalty,
                              Eigen::VectorXd& beta, int max_sweeps, double tol);

}  // namespace geltc
