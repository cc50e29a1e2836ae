#include "geltc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace geltc {

double composite_objective(const Eigen::VectorXd& theta, const Dataset& data, const RegularizerSpec& spec,
                           double lambda, const GlmFamily& family) {
  double value = glm_loss(theta, data, family);
  if (lambda > 0.0) value += lambda * reg_value(spec, Tensor(data.dims, theta));
  return value;
}

namespace {

struct ProxStep {
  Eigen::VectorXd point;
  double residual = 0.0;
};

ProxStep prox_step(const RegularizerSpec& spec, const Dims& dims, const Eigen::VectorXd& v, double tau,
                   const ProxOptions& opts) {
  if (tau <= 0.0) return {v, 0.0};
  ProxResult r = reg_prox_detailed(spec, Tensor(dims, v), tau, opts);
  return {std::move(r.value.data()), r.residual};
}

}  // namespace

FitResult fit(const Dataset& data, const RegularizerSpec& spec, double lambda, const GlmFamily& family,
              const FitOptions& opts) {
  if (data.samples() == 0) throw std::invalid_argument("fit: empty data");
  if (!(lambda >= 0.0)) throw std::invalid_argument("fit: lambda must be non-negative");
  if (!(opts.shrink > 0.0 && opts.shrink < 1.0)) throw std::invalid_argument("fit: shrink must lie in (0,1)");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("fit: tol must be positive");
  check_compatible(spec, data.dims);

  const Eigen::Index p = data.features.cols();
  const auto regularizer = [&](const Eigen::VectorXd& v) {
    return lambda > 0.0 ? lambda * reg_value(spec, Tensor(data.dims, v)) : 0.0;
  };

  FitDiagnostics diag;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd y = x;
  double f_x = glm_loss(x, data, family);
  double obj_x = f_x + regularizer(x);
  double momentum = 1.0;
  double step = opts.initial_step;
  const double max_step = 1e12;
  ProxOptions prox_opts = opts.prox;

  const auto stationarity_at = [&](const Eigen::VectorXd& v, double s) {
    const Eigen::VectorXd g = glm_loss_gradient(v, data, family);
    ProxStep ps = prox_step(spec, data.dims, v - s * g, s * lambda, prox_opts);
    diag.prox_residual = std::max(diag.prox_residual, ps.residual);
    return (v - ps.point).norm() / std::max(1.0, v.norm());
  };

  for (diag.iterations = 0; diag.iterations < opts.max_iters;) {
    ++diag.iterations;
    const double f_y = glm_loss(y, data, family);
    const Eigen::VectorXd grad = glm_loss_gradient(y, data, family);

    // Try a longer step first, then backtrack on the quadratic upper model.
    step = std::min(step / opts.shrink, max_step);
    Eigen::VectorXd candidate;
    double f_candidate = 0.0;
    for (;;) {
      ProxStep ps = prox_step(spec, data.dims, y - step * grad, step * lambda, prox_opts);
      diag.prox_residual = std::max(diag.prox_residual, ps.residual);
      candidate = std::move(ps.point);
      f_candidate = glm_loss(candidate, data, family);
      const Eigen::VectorXd diff = candidate - y;
      const double model = f_y + grad.dot(diff) + (1.0 - opts.sufficient_decrease) / (2.0 * step) * diff.squaredNorm();
      if (std::isfinite(f_candidate) && f_candidate <= model + 1e-15 * std::abs(f_y)) break;
      step *= opts.shrink;
      if (step < 1e-20) break;
    }

    const double obj_candidate = f_candidate + regularizer(candidate);
    if (opts.restart && !(obj_candidate <= obj_x)) {
      // Momentum overshoot: drop it and take a plain proximal step from x next.
      ++diag.restarts;
      momentum = 1.0;
      if (y == x) {
        // A plain step from x cannot descend. The iterative prox may be the
        // limiting accuracy, so tighten it before giving up.
        if (prox_opts.tol > 1e-13) {
          prox_opts.tol *= 1e-2;
          prox_opts.max_iters *= 2;
          continue;
        }
        diag.relative_change = 0.0;
        diag.stationarity = stationarity_at(x, step);
        diag.converged = diag.stationarity < opts.stationarity_tol;
        break;
      }
      y = x;
      continue;
    }

    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = candidate + ((momentum - 1.0) / next_momentum) * (candidate - x);
    momentum = next_momentum;
    diag.relative_change = std::abs(obj_x - obj_candidate) / std::max(1.0, std::abs(obj_x));
    x = std::move(candidate);
    obj_x = obj_candidate;

    if (diag.relative_change < opts.tol) {
      diag.stationarity = stationarity_at(x, step);
      if (diag.stationarity < opts.stationarity_tol) {
        diag.converged = true;
        break;
      }
    }
  }

  if (!diag.converged) diag.stationarity = stationarity_at(x, step);
  diag.objective = obj_x;
  diag.step = step;
  return {Tensor(data.dims, std::move(x)), diag};
}

FitResult fit(std::span<const Tensor> contexts, std::span<const double> rewards,
              const RegularizerSpec& spec, double lambda, const GlmFamily& family,
              const FitOptions& opts) {
  return fit(Dataset::from(contexts, rewards), spec, lambda, family, opts);
}

WidthEstimate gaussian_width_estimate(const RegularizerSpec& spec, const Dims& dims,
                                      std::size_t n_samples, Rng& rng, double max_relative_se) {
  if (n_samples == 0) throw std::invalid_argument("gaussian_width_estimate: n_samples must be positive");
  check_compatible(spec, dims);
  const std::size_t cap = 64 * n_samples;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t drawn = 0;
  std::size_t target = n_samples;
  WidthEstimate est;
  for (;;) {
    for (; drawn < target; ++drawn) {
      const double v = reg_dual(spec, gaussian_tensor(dims, rng));
      sum += v;
      sum_sq += v * v;
    }
    const double n = static_cast<double>(drawn);
    est.mean = sum / n;
    const double var = drawn > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
    est.std_error = std::sqrt(var / n);
    est.samples = drawn;
    if (est.std_error <= max_relative_se * est.mean || target >= cap) break;
    target = std::min(cap, 2 * target);
  }
  return est;
}

std::size_t exploration_length(double c_explore, double phi, double width, std::size_t horizon) {
  if (horizon < 2) throw std::invalid_argument("exploration_length: horizon must be at least 2");
  const auto upper = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(horizon))));
  const double raw = std::ceil(c_explore * phi * width * width);
  if (!(raw >= 1.0)) return 1;
  if (raw >= static_cast<double>(upper)) return upper;
  return static_cast<std::size_t>(raw);
}

double lambda_for(const LambdaSchedule& schedule, const RegularizerSpec& spec, const Dims& dims,
                  std::size_t t1) {
  if (schedule.kind != spec.kind) throw std::invalid_argument("lambda schedule and regularizer kinds differ");
  if (t1 < 1) throw std::invalid_argument("lambda_for: T1 must be at least 1");
  if (!(schedule.delta > 0.0 && schedule.delta < 1.0)) throw std::invalid_argument("lambda_for: delta must lie in (0,1)");
  check_compatible(spec, dims);

  const double delta = schedule.delta;
  const double noise = schedule.noise_scale;
  const double n1 = static_cast<double>(t1);
  const double c_r = spec.c_r();
  const double alpha = schedule.alpha(c_r);
  const double total = static_cast<double>(product(dims));
  const double k = schedule.k.value_or(1.0 / std::sqrt(total));

  double value = 0.0;
  switch (spec.kind) {
    case RegularizerKind::OverlappedNuclear: {
      const double order = static_cast<double>(dims.size());
      const double d = static_cast<double>(*std::max_element(dims.begin(), dims.end()));
      const double spread = std::log(2.0 * order * (d + std::pow(d, order - 1.0)) / delta);
      value = alpha * noise * order / std::sqrt(n1) *
              std::sqrt(2.0 * std::log(4.0 * n1 * order / delta) * spread);
      break;
    }
    case RegularizerKind::SliceNuclear: {
      const double d1 = static_cast<double>(dims[0]), d2 = static_cast<double>(dims[1]);
      const double d3 = static_cast<double>(dims[2]);
      value = noise * (c_r + 3.0) / (c_r * std::sqrt(n1)) *
              std::sqrt(std::log(4.0 * n1 * d3 / delta) * std::log(2.0 * d3 * (d1 + d2) / delta));
      break;
    }
    case RegularizerKind::EntryL1:
      value = (c_r + 3.0) * noise * k / (2.0 * c_r * std::sqrt(n1)) * std::sqrt(std::log(2.0 * total / delta));
      break;
    case RegularizerKind::FiberGroup: {
      const double d1 = static_cast<double>(dims[spec.fiber_mode]);
      const double rest = total / d1;
      value = alpha * noise * k * (std::sqrt(d1) + std::sqrt(std::log(4.0 * rest / delta))) / std::sqrt(n1) *
              std::sqrt(2.0 * std::log(4.0 * n1 * rest / delta)) * eta(d1, 0.5 - 1.0 / spec.q);
      break;
    }
  }
  return schedule.c_lambda * value;
}

}  // namespace geltc
