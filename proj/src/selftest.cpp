#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "geltc/harness.hpp"

namespace geltc {

namespace {

using Check = std::function<std::string()>;  // empty string means pass

std::string fail(const std::string& what, double value) {
  std::ostringstream os;
  os << what << " (" << value << ")";
  return os.str();
}

std::string tensor_roundtrip() {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = gaussian_tensor({3, 4, 5}, rng);
    for (std::size_t mode = 0; mode < 3; ++mode) {
      const Matricization m = matricize(a, mode);
      if (std::abs(m.matrix.norm() - frob_norm(a)) > 1e-10 * frob_norm(a)) return fail("norm not preserved", mode);
      if (!(tensorize(m, a.dims()) == a)) return fail("tensorize does not invert matricize", mode);
    }
  }
  return {};
}

std::string hosvd_ranks() {
  Rng rng(12);
  const Tensor a = gaussian_tensor({5, 5, 5}, rng);
  const Tensor b = hosvd_truncate(a, {2, 2, 2});
  for (std::size_t mode = 0; mode < 3; ++mode) {
    const std::size_t r = numerical_rank(unfolding_singular_values(b, mode));
    if (r > 2) return fail("unfolding rank above cap", static_cast<double>(r));
  }
  const Tensor c = hosvd_truncate(b, {2, 2, 2});
  const double drift = frob_norm(c - b);
  if (drift > 1e-10 * frob_norm(b)) return fail("truncation not idempotent", drift);
  return {};
}

std::string entry_prox() {
  Rng rng(13);
  const Tensor a = gaussian_tensor({4, 6}, rng);
  const double tau = 0.3;
  const Tensor p = reg_prox(RegularizerSpec::entry_l1(3), a, tau);
  for (Eigen::Index i = 0; i < a.data().size(); ++i) {
    const double x = a.data()[i];
    const double expected = x > tau ? x - tau : (x < -tau ? x + tau : 0.0);
    if (p.data()[i] != expected) return fail("soft threshold mismatch at entry", static_cast<double>(i));
  }
  return {};
}

std::string overlapped_prox_optimal() {
  Rng rng(14);
  const RegularizerSpec spec = RegularizerSpec::overlapped_nuclear(1);
  const Tensor a = gaussian_tensor({2, 2, 2}, rng);
  const double tau = 0.4;
  const auto objective = [&](const Tensor& x) {
    const Tensor diff = x - a;
    return 0.5 * inner(diff, diff) + tau * reg_value(spec, x);
  };
  const Tensor p = reg_prox(spec, a, tau);
  const double best = objective(p);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int probe = 0; probe < 500; ++probe) {
    Tensor x = p;
    for (Eigen::Index i = 0; i < x.data().size(); ++i) x.data()[i] += noise(rng);
    if (objective(x) < best - 1e-4) return fail("random probe beat the prox objective", best - objective(x));
  }
  return {};
}

std::string glm_derivatives() {
  const double h = 1e-5;
  for (const GlmFamily& family : {GlmFamily::logistic(), GlmFamily::poisson(), GlmFamily::gaussian(1.0)}) {
    for (double x = -5.0; x <= 5.0; x += 0.5) {
      const double fd = (cumulant(family, x + h) - cumulant(family, x - h)) / (2.0 * h);
      const double err = std::abs(fd - mu(family, x)) / std::max(1.0, std::abs(mu(family, x)));
      if (err > 1e-6) return fail(std::string(to_string(family.kind)) + ": mu differs from b'", err);
    }
  }
  return {};
}

std::string loss_gradient() {
  Rng rng(15);
  const Dims dims{2, 3, 2};
  std::vector<Tensor> contexts;
  std::vector<double> rewards;
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 30; ++i) {
    contexts.push_back(gaussian_tensor(dims, rng));
    rewards.push_back(coin(rng) ? 1.0 : 0.0);
  }
  const GlmFamily family = GlmFamily::logistic();
  const Tensor theta = gaussian_tensor(dims, rng) * 0.3;
  const Tensor g = glm_loss_gradient(theta, contexts, rewards, family);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < theta.data().size(); ++i) {
    Tensor up = theta, down = theta;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double fd = (glm_loss(up, contexts, rewards, family) - glm_loss(down, contexts, rewards, family)) / (2.0 * h);
    const double err = std::abs(fd - g.data()[i]) / std::max(1e-3, std::abs(g.data()[i]));
    if (err > 1e-4) return fail("gradient differs from finite difference", err);
  }
  return {};
}

std::string lambda_monotone() {
  const Dims dims{8, 8, 8};
  const RegularizerSpec spec = RegularizerSpec::overlapped_nuclear(2);
  LambdaSchedule schedule;
  double previous = lambda_for(schedule, spec, dims, 10);
  for (std::size_t t1 = 20; t1 <= 20000; t1 *= 2) {
    const double value = lambda_for(schedule, spec, dims, t1);
    if (!(value < previous)) return fail("lambda not decreasing in T1 at", static_cast<double>(t1));
    previous = value;
  }
  return {};
}

std::string fit_descends() {
  Rng rng(16);
  const Dims dims{3, 3, 3};
  const RegularizerSpec spec = RegularizerSpec::overlapped_nuclear(1);
  const GlmFamily family = GlmFamily::logistic();
  const Tensor truth = hosvd_truncate(gaussian_tensor(dims, rng), {1, 1, 1});
  std::vector<Tensor> contexts;
  std::vector<double> rewards;
  for (int i = 0; i < 80; ++i) {
    contexts.push_back(gaussian_tensor(dims, rng));
    rewards.push_back(sample_reward(family, inner(truth, contexts.back()), rng));
  }
  const Dataset data = Dataset::from(contexts, rewards);
  const double lambda = 0.05;
  const FitResult r = fit(data, spec, lambda, family);
  const double at_zero = composite_objective(Eigen::VectorXd::Zero(27), data, spec, lambda, family);
  if (!(r.diagnostics.objective <= at_zero)) return fail("objective above its value at zero", r.diagnostics.objective);
  if (!r.diagnostics.converged) return fail("fit did not converge, stationarity", r.diagnostics.stationarity);
  return {};
}

std::string bandit_deterministic() {
  const Dims dims{3, 3, 3};
  const RegularizerSpec spec = RegularizerSpec::overlapped_nuclear(1);
  const InstanceSeeds seeds = InstanceSeeds::derive(derive_seed(7, 0));
  const BanditInstance instance = make_instance(dims, spec, 5, 150, GlmFamily::logistic(), {}, seeds);
  LambdaSchedule schedule;
  GeltcOptions opts;
  opts.width_samples = 50;
  const RunRecord a = run_geltc(instance, schedule, opts);
  const RunRecord b = run_geltc(instance, schedule, opts);
  if (a.cumulative_regret != b.cumulative_regret || a.chosen_arm != b.chosen_arm)
    return "identical seeds gave different trajectories";
  for (std::size_t t = 1; t < a.cumulative_regret.size(); ++t)
    if (a.cumulative_regret[t] < a.cumulative_regret[t - 1] - 1e-12) return fail("cumulative regret decreased at", t);
  return {};
}

std::string seed_streams() {
  if (derive_seed(1, 0) == derive_seed(1, 1) || derive_seed(1, 0) == derive_seed(2, 0))
    return "seed streams collide";
  const InstanceSeeds s = InstanceSeeds::derive(42);
  if (s.truth == s.contexts || s.contexts == s.rewards || s.rewards == s.policy) return "instance streams collide";
  return {};
}

}  // namespace

std::vector<SelfCheck> run_selftest() {
  const std::vector<std::pair<std::string, Check>> checks = {
      {"matricize round trip and norm", tensor_roundtrip},
      {"hosvd rank cap and idempotence", hosvd_ranks},
      {"entry l1 prox is soft threshold", entry_prox},
      {"overlapped nuclear prox beats probes", overlapped_prox_optimal},
      {"mean function is cumulant derivative", glm_derivatives},
      {"loss gradient matches finite differences", loss_gradient},
      {"lambda decreases in exploration length", lambda_monotone},
      {"fit descends below zero estimate", fit_descends},
      {"bandit run is deterministic", bandit_deterministic},
      {"seed streams are distinct", seed_streams},
  };
  std::vector<SelfCheck> out;
  for (const auto& [name, check] : checks) {
    SelfCheck result{name, false, {}};
    try {
      result.detail = check();
      result.passed = result.detail.empty();
    } catch (const std::exception& e) {
      result.detail = std::string("threw: ") + e.what();
    }
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace geltc
