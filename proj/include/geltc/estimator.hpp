#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "geltc/glm.hpp"
#include "geltc/random.hpp"
#include "geltc/regularizer.hpp"
#include "geltc/tensor.hpp"

namespace geltc {

/// Accelerated proximal gradient settings.
struct FitOptions {
  int max_iters = 2000;
  /// Relative change of the composite objective below which we may stop.
  double tol = 1e-8;
  /// Gradient-mapping residual that must also hold before stopping.
  double stationarity_tol = 1e-6;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  bool restart = true;
  ProxOptions prox;
};

struct FitDiagnostics {
  int iterations = 0;
  double objective = 0.0;
  double relative_change = 0.0;
  double step = 0.0;
  /// ||theta - prox(theta - step * grad, step * lambda)|| / max(1, ||theta||).
  double stationarity = 0.0;
  /// Worst inner-solver residual seen (overlapped nuclear norm only).
  double prox_residual = 0.0;
  int restarts = 0;
  bool converged = false;
};

struct FitResult {
  Tensor theta;
  FitDiagnostics diagnostics;
};

/// Minimizes glm_loss + lambda * R from the zero tensor. Non-convergence is
/// reported in the diagnostics, never thrown.
FitResult fit(const Dataset& data, const RegularizerSpec& spec, double lambda, const GlmFamily& family,
              const FitOptions& opts = {});
FitResult fit(std::span<const Tensor> contexts, std::span<const double> rewards,
              const RegularizerSpec& spec, double lambda, const GlmFamily& family,
              const FitOptions& opts = {});

double composite_objective(const Eigen::VectorXd& theta, const Dataset& data, const RegularizerSpec& spec,
                           double lambda, const GlmFamily& family);

struct WidthEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo estimate of w({R <= 1}) = E[R*(G)] over standard Gaussian G.
/// When the standard error exceeds `max_relative_se` of the mean the sample
/// count doubles, up to 64x the request.
WidthEstimate gaussian_width_estimate(const RegularizerSpec& spec, const Dims& dims,
                                      std::size_t n_samples, Rng& rng,
                                      double max_relative_se = 0.05);

/// T1 = clamp(ceil(c * phi * width^2), 1, floor(0.9 T)).
std::size_t exploration_length(double c_explore, double phi, double width, std::size_t horizon);

struct LambdaSchedule {
  RegularizerKind kind = RegularizerKind::OverlappedNuclear;
  double delta = 0.01;
  double noise_scale = 0.5;
  /// Sub-Gaussian scale of the vectorized contexts; defaults to 1/sqrt(prod d).
  std::optional<double> k;
  double c_lambda = 1.0;

  double alpha(double c_r) const { return (c_r + 3.0) / (2.0 * c_r); }
};

/// Regularization level after T1 exploration rounds for the structure in `spec`.
double lambda_for(const LambdaSchedule& schedule, const RegularizerSpec& spec, const Dims& dims,
                  std::size_t t1);

}  // namespace geltc
