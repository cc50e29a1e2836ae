#include "geltc/glm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace geltc {

std::string_view to_string(GlmKind kind) {
  switch (kind) {
    case GlmKind::BernoulliLogistic: return "logistic";
    case GlmKind::Poisson: return "poisson";
    case GlmKind::GaussianIdentity: return "gaussian";
  }
  return "unknown";
}

GlmKind parse_glm_kind(std::string_view name) {
  if (name == "logistic") return GlmKind::BernoulliLogistic;
  if (name == "poisson") return GlmKind::Poisson;
  if (name == "gaussian") return GlmKind::GaussianIdentity;
  throw std::invalid_argument("unknown reward family '" + std::string(name) + "'");
}

double mu(const GlmFamily& family, double x) {
  switch (family.kind) {
    case GlmKind::BernoulliLogistic:
      if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case GlmKind::Poisson: return std::exp(x);
    case GlmKind::GaussianIdentity: return x;
  }
  return 0.0;
}

double mu_prime(const GlmFamily& family, double x) {
  switch (family.kind) {
    case GlmKind::BernoulliLogistic: {
      const double p = mu(family, x);
      return p * (1.0 - p);
    }
    case GlmKind::Poisson: return std::exp(x);
    case GlmKind::GaussianIdentity: return 1.0;
  }
  return 0.0;
}

double cumulant(const GlmFamily& family, double x) {
  switch (family.kind) {
    case GlmKind::BernoulliLogistic:
      // softplus, branched so exp never overflows
      return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case GlmKind::Poisson: return std::exp(x);
    case GlmKind::GaussianIdentity: return 0.5 * x * x;
  }
  return 0.0;
}

double k_mu(const GlmFamily& family) {
  switch (family.kind) {
    case GlmKind::BernoulliLogistic: return 0.25;
    case GlmKind::Poisson: return std::exp(1.0);
    case GlmKind::GaussianIdentity: return 1.0;
  }
  return 1.0;
}

double sample_reward(const GlmFamily& family, double mean_arg, Rng& rng) {
  switch (family.kind) {
    case GlmKind::BernoulliLogistic: {
      std::bernoulli_distribution coin(mu(family, mean_arg));
      return coin(rng) ? 1.0 : 0.0;
    }
    case GlmKind::Poisson: {
      std::poisson_distribution<long long> draw(mu(family, mean_arg));
      return static_cast<double>(draw(rng));
    }
    case GlmKind::GaussianIdentity: {
      if (family.noise_scale == 0.0) return mean_arg;
      std::normal_distribution<double> noise(0.0, family.noise_scale);
      return mean_arg + noise(rng);
    }
  }
  return 0.0;
}

Dataset Dataset::from(std::span<const Tensor> contexts, std::span<const double> rewards) {
  if (contexts.empty()) throw std::invalid_argument("dataset needs at least one sample");
  if (contexts.size() != rewards.size())
    throw ShapeError("context count " + std::to_string(contexts.size()) + " != reward count " +
                     std::to_string(rewards.size()));
  Dataset out;
  out.dims = contexts.front().dims();
  const auto n = static_cast<Eigen::Index>(contexts.size());
  out.features.resize(n, static_cast<Eigen::Index>(product(out.dims)));
  out.rewards.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Tensor& x = contexts[static_cast<std::size_t>(t)];
    if (x.dims() != out.dims) throw ShapeError("all contexts must share dims");
    out.features.row(t) = x.data().transpose();
    out.rewards[t] = rewards[static_cast<std::size_t>(t)];
  }
  return out;
}

double glm_loss(const Eigen::VectorXd& theta, const Dataset& data, const GlmFamily& family) {
  if (data.samples() == 0) throw std::invalid_argument("glm_loss: empty data");
  if (theta.size() != data.features.cols()) throw ShapeError("glm_loss: parameter size mismatch");
  const Eigen::VectorXd eta = data.features * theta;
  double total = 0.0;
  for (Eigen::Index t = 0; t < eta.size(); ++t)
    total += cumulant(family, eta[t]) - data.rewards[t] * eta[t];
  return total / static_cast<double>(eta.size());
}

Eigen::VectorXd glm_loss_gradient(const Eigen::VectorXd& theta, const Dataset& data,
                                  const GlmFamily& family) {
  if (data.samples() == 0) throw std::invalid_argument("glm_loss_gradient: empty data");
  if (theta.size() != data.features.cols()) throw ShapeError("glm_loss_gradient: parameter size mismatch");
  Eigen::VectorXd residual = data.features * theta;
  for (Eigen::Index t = 0; t < residual.size(); ++t)
    residual[t] = mu(family, residual[t]) - data.rewards[t];
  return data.features.transpose() * residual / static_cast<double>(residual.size());
}

namespace {

void check_theta(const Tensor& theta, const Dataset& data) {
  if (theta.dims() != data.dims) throw ShapeError("parameter dims do not match context dims");
}

}  // namespace

double glm_loss(const Tensor& theta, std::span<const Tensor> contexts, std::span<const double> rewards,
                const GlmFamily& family) {
  const Dataset data = Dataset::from(contexts, rewards);
  check_theta(theta, data);
  return glm_loss(theta.data(), data, family);
}

Tensor glm_loss_gradient(const Tensor& theta, std::span<const Tensor> contexts,
                         std::span<const double> rewards, const GlmFamily& family) {
  const Dataset data = Dataset::from(contexts, rewards);
  check_theta(theta, data);
  return Tensor(theta.dims(), glm_loss_gradient(theta.data(), data, family));
}

}  // namespace geltc
