#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geltc/random.hpp"
#include "geltc/tensor.hpp"

namespace geltc {

enum class GlmKind { BernoulliLogistic, Poisson, GaussianIdentity };

std::string_view to_string(GlmKind kind);
GlmKind parse_glm_kind(std::string_view name);

/// Canonical-link reward family with sub-Gaussian noise scale R.
struct GlmFamily {
  GlmKind kind = GlmKind::BernoulliLogistic;
  double noise_scale = 0.5;

  static GlmFamily logistic() { return {GlmKind::BernoulliLogistic, 0.5}; }
  static GlmFamily poisson() { return {GlmKind::Poisson, 1.0}; }
  static GlmFamily gaussian(double sigma) { return {GlmKind::GaussianIdentity, sigma}; }
};

/// Inverse link.
double mu(const GlmFamily& family, double x);
double mu_prime(const GlmFamily& family, double x);
/// Log-partition b with b' = mu.
double cumulant(const GlmFamily& family, double x);
/// Bound on |mu'| over [-1, 1].
double k_mu(const GlmFamily& family);

double sample_reward(const GlmFamily& family, double mean_arg, Rng& rng);

/// Row-stacked design: row t is vectorize(X_t).
struct Dataset {
  Dims dims;
  Eigen::MatrixXd features;
  Eigen::VectorXd rewards;

  static Dataset from(std::span<const Tensor> contexts, std::span<const double> rewards);
  std::size_t samples() const { return static_cast<std::size_t>(features.rows()); }
};

/// (1/T) sum_t [ b(<X_t, theta>) - y_t <X_t, theta> ].
double glm_loss(const Tensor& theta, std::span<const Tensor> contexts, std::span<const double> rewards,
                const GlmFamily& family);
Tensor glm_loss_gradient(const Tensor& theta, std::span<const Tensor> contexts,
                         std::span<const double> rewards, const GlmFamily& family);

double glm_loss(const Eigen::VectorXd& theta, const Dataset& data, const GlmFamily& family);
Eigen::VectorXd glm_loss_gradient(const Eigen::VectorXd& theta, const Dataset& data,
                                  const GlmFamily& family);

}  // namespace geltc
